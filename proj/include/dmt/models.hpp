#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmt/autodiff.hpp"
#include "dmt/tensor.hpp"

namespace dmt {

enum class Architecture { mlp, conv, affine };
enum class ModelRole { denoiser, translator };

std::string to_string(Architecture a);
std::string to_string(ModelRole r);

/// Everything needed to rebuild a network's parameter layout.
///   mlp:    vector samples [d]; three linear layers, tanh, width `hidden`,
///           input multiplied by `input_scale`.
///   conv:   image samples [c, h, w] with h, w divisible by 4; encoder-decoder
///           with widths `channels` (three levels) and concatenated skips.
///   affine: vector samples, x -> x A + b (translator only).
/// Denoisers add a sinusoidal time embedding of size `time_dim` to the first
/// hidden layer (mlp) or the bottleneck (conv) and zero-initialize the last
/// layer. Translators take no time input and compute x + g(x) with g's last
/// layer zero-initialized, so a fresh translator is the identity.
struct ModelDescriptor {
  Architecture arch = Architecture::mlp;
  ModelRole role = ModelRole::denoiser;
  Shape sample_shape;
  int hidden = 128;
  std::vector<int> channels{16, 32, 64};
  int time_dim = 32;
  /// mlp only: samples are multiplied by this before the first layer.
  double input_scale = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelDescriptor from_json(const nlohmann::json& j);

  friend bool operator==(const ModelDescriptor&, const ModelDescriptor&) = default;
};

ModelDescriptor default_descriptor(ModelRole role, const Shape& sample_shape);

/// Sinusoidal embedding of each t, one row per entry: [n, dim].
Tensor time_embedding(std::span<const int> ts, int dim);

class Model {
 public:
  Model(ModelDescriptor descriptor, std::uint64_t init_seed);

  const ModelDescriptor& descriptor() const noexcept { return desc_; }
  std::vector<Tensor>& parameters() noexcept { return params_; }
  const std::vector<Tensor>& parameters() const noexcept { return params_; }
  const std::vector<std::string>& parameter_names() const noexcept { return names_; }
  std::size_t parameter_count() const noexcept;
  void set_requires_grad(bool on);

  /// x is one sample (shape == sample_shape) or a batch [B, sample_shape...];
  /// the output has x's shape. Denoisers take one t per row or a single t for
  /// all rows; translators take none.
  Var forward(Tape& tape, Var x, std::span<const int> ts = {});

  /// Inference without gradient tracking.
  Tensor predict(const Tensor& x, int t) const;
  Tensor translate(const Tensor& x) const;

 private:
  template <class Bind>
  Var run(Tape& tape, Var x, std::span<const int> ts, Bind bind) const;
  template <class Bind>
  Var run_mlp(Tape& tape, Var x, std::span<const int> ts, std::size_t batch, Bind bind) const;
  template <class Bind>
  Var run_conv(Tape& tape, Var x, std::span<const int> ts, std::size_t batch, Bind bind) const;

  void add_param(std::string name, Shape shape);

  ModelDescriptor desc_;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
};

}  // namespace dmt
