#pragma once

// Define-by-run reverse-mode differentiation. A Tape is built fresh for every
// forward pass; ops append nodes in evaluation order, so node ids are already
// a topological order and backward() is a single reverse sweep.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "dmt/tensor.hpp"

namespace dmt {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class BackwardContext;

class Tape {
 public:
  using BackwardFn = std::function<void(BackwardContext&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Non-owning constant; `value` must outlive the tape.
  Var constant_ref(const Tensor& value);
  /// Leaf bound to a parameter. If param.requires_grad(), backward() adds
  /// d(loss)/d(param) into param's gradient buffer.
  Var parameter(Tensor& param);

  /// Appends an op result. `backward` receives the output gradient and must
  /// accumulate into the gradients of inputs that need one.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const;
  /// Gradient of the last backward() loss w.r.t. v; empty if v got none.
  std::span<const double> grad(Var v) const;

  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class BackwardContext;

  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
    std::vector<double> grad;

    const Tensor& value() const { return ref ? *ref : owned; }
  };

  void check_owned(Var v) const;
  std::span<double> grad_buffer(std::size_t id);

  // deque keeps references to earlier values valid while the tape grows.
  std::deque<Node> nodes_;
};

class BackwardContext {
 public:
  BackwardContext(Tape& tape, std::size_t id) : tape_(tape), id_(id) {}

  std::span<const double> out_grad() const { return tape_.nodes_[id_].grad; }
  const Tensor& out_value() const { return tape_.nodes_[id_].value(); }
  const Tensor& input(std::size_t k) const { return tape_.nodes_[input_id(k)].value(); }
  bool needs_grad(std::size_t k) const { return tape_.nodes_[input_id(k)].needs_grad; }
  /// Zero-initialized on first access within this backward pass.
  std::span<double> input_grad(std::size_t k) { return tape_.grad_buffer(input_id(k)); }

 private:
  std::size_t input_id(std::size_t k) const { return tape_.nodes_[id_].inputs[k]; }

  Tape& tape_;
  std::size_t id_;
};

namespace ops {

Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var tanh(Var a);
Var silu(Var a);
Var square(Var a);

/// Scalar (rank-0) results.
Var sum(Var a);
Var mean(Var a);

Var reshape(Var a, Shape shape);

/// x [..., n] + bias [n], bias broadcast over leading axes.
Var add_bias(Var x, Var bias);

/// 3x3 convolution, padding 1. x is [c_in, h, w] or [batch, c_in, h, w];
/// kernel is [c_out, c_in, 3, 3].
Var conv2d(Var x, Var kernel);
/// x [batch, c, h, w] + bias [c].
Var add_channel_bias(Var x, Var bias);
/// x [batch, c, h, w] + v [batch, c], v broadcast over the spatial axes.
Var add_channel_vector(Var x, Var v);
/// 2x2 average pooling; h and w must be even.
Var avg_pool2(Var x);
/// Nearest-neighbour 2x upsampling.
Var upsample2(Var x);
/// Concatenation along axis 1 of two [batch, c, h, w] tensors.
Var concat_channels(Var a, Var b);

/// sum((a - b)^2)
Var squared_error(Var a, Var b);

}  // namespace ops

}  // namespace dmt
