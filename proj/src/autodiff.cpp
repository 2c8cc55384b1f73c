#include "dmt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmt/errors.hpp"
#include "dmt/kernels.hpp"

namespace dmt {

const Tensor& Var::value() const {
  if (!tape) throw ContractError("Var is not attached to a tape");
  return tape->value(*this);
}

void Tape::check_owned(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  Node n;
  n.ref = &param;
  n.param = &param;
  n.needs_grad = param.requires_grad();
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (Var v : inputs) {
    check_owned(v);
    n.inputs.push_back(v.id);
    n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id].value();
}

bool Tape::needs_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id].needs_grad;
}

std::span<const double> Tape::grad(Var v) const {
  check_owned(v);
  return nodes_[v.id].grad;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value().size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (nodes_[loss.id].value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_to_string(nodes_[loss.id].value().shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) {
      BackwardContext ctx(*this, id);
      n.backward(ctx);
    }
    if (n.param) {
      std::span<double> dst = n.param->ensure_grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    }
  }
}

namespace ops {

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.tape || a.tape != b.tape) throw ContractError("operands live on different tapes");
  return *a.tape;
}

void require_shapes(const Tensor& a, const Tensor& b, const char* what) {
  require_same_shape(a, b, what);
}

template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return a.tape->record(std::move(out), {a}, [deriv](BackwardContext& ctx) {
    const Tensor& in = ctx.input(0);
    const Tensor& y = ctx.out_value();
    auto g = ctx.out_grad();
    auto dx = ctx.input_grad(0);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * deriv(in[i], y[i]);
  });
}

// Interprets a rank-3 or rank-4 activation as [batch, c, h, w].
struct Nchw {
  std::size_t b, c, h, w;
};

Nchw as_nchw(const Shape& s, const char* what) {
  if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  throw DimensionError(std::string(what) + " expects [c,h,w] or [b,c,h,w], got " +
                       shape_to_string(s));
}

Nchw require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) {
    throw DimensionError(std::string(what) + " expects [b,c,h,w], got " + shape_to_string(s));
  }
  return {s[0], s[1], s[2], s[3]};
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_to_string(av.shape()) + " by " +
                         shape_to_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  kernels::parallel::matmul(av.data(), bv.data(), out.data(), m, k, n);
  return tape.record(std::move(out), {a, b}, [m, k, n](BackwardContext& ctx) {
    if (ctx.needs_grad(0)) {
      kernels::parallel::matmul_grad_a(ctx.out_grad(), ctx.input(1).data(), ctx.input_grad(0), m,
                                       k, n);
    }
    if (ctx.needs_grad(1)) {
      kernels::parallel::matmul_grad_b(ctx.input(0).data(), ctx.out_grad(), ctx.input_grad(1), m,
                                       k, n);
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_shapes(a.value(), b.value(), "add");
  return tape.record(a.value() + b.value(), {a, b}, [](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    for (std::size_t k = 0; k < 2; ++k) {
      if (!ctx.needs_grad(k)) continue;
      auto d = ctx.input_grad(k);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_shapes(a.value(), b.value(), "sub");
  return tape.record(a.value() - b.value(), {a, b}, [](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) {
      auto d = ctx.input_grad(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (ctx.needs_grad(1)) {
      auto d = ctx.input_grad(1);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_shapes(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return tape.record(std::move(out), {a, b}, [](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    for (std::size_t k = 0; k < 2; ++k) {
      if (!ctx.needs_grad(k)) continue;
      const Tensor& other = ctx.input(1 - k);
      auto d = ctx.input_grad(k);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * other[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var silu(Var a) {
  return unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double sig = 1.0 / (1.0 + std::exp(-x));
        return sig * (1.0 + x * (1.0 - sig));
      });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  Tensor out(Shape{});
  out[0] = dmt::sum(x);
  return a.tape->record(std::move(out), {a}, [](BackwardContext& ctx) {
    const double g = ctx.out_grad()[0];
    for (double& d : ctx.input_grad(0)) d += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var reshape(Var a, Shape shape) {
  return a.tape->record(a.value().reshaped(std::move(shape)), {a}, [](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || xv.rank() < 1 || xv.shape().back() != bv.dim(0)) {
    throw DimensionError("add_bias: bias " + shape_to_string(bv.shape()) +
                         " does not match trailing axis of " + shape_to_string(xv.shape()));
  }
  const std::size_t n = bv.size();
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  return tape.record(std::move(out), {x, bias}, [n](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) {
      auto d = ctx.input_grad(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (ctx.needs_grad(1)) {
      auto d = ctx.input_grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) d[i % n] += g[i];
    }
  });
}

Var conv2d(Var x, Var kernel) {
  Tape& tape = same_tape(x, kernel);
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const Nchw s = as_nchw(xv.shape(), "conv2d");
  if (kv.rank() != 4 || kv.dim(2) != 3 || kv.dim(3) != 3) {
    throw DimensionError("conv2d: kernel must be [c_out,c_in,3,3], got " +
                         shape_to_string(kv.shape()));
  }
  if (kv.dim(1) != s.c) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(kv.dim(1)) +
                         " input channels, input has " + std::to_string(s.c));
  }
  const kernels::ConvDims dims{s.b, s.c, kv.dim(0), s.h, s.w};
  Shape out_shape = xv.rank() == 4 ? Shape{s.b, dims.c_out, s.h, s.w} : Shape{dims.c_out, s.h, s.w};
  Tensor out(std::move(out_shape));
  kernels::parallel::conv2d_forward(xv.data(), kv.data(), out.data(), dims);
  return tape.record(std::move(out), {x, kernel}, [dims](BackwardContext& ctx) {
    if (ctx.needs_grad(0)) {
      kernels::parallel::conv2d_grad_input(ctx.out_grad(), ctx.input(1).data(), ctx.input_grad(0),
                                           dims);
    }
    if (ctx.needs_grad(1)) {
      kernels::parallel::conv2d_grad_weight(ctx.input(0).data(), ctx.out_grad(),
                                            ctx.input_grad(1), dims);
    }
  });
}

Var add_channel_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  const Nchw s = require_rank4(xv.shape(), "add_channel_bias");
  if (bv.rank() != 1 || bv.dim(0) != s.c) {
    throw DimensionError("add_channel_bias: bias " + shape_to_string(bv.shape()) +
                         " does not match channels of " + shape_to_string(xv.shape()));
  }
  const std::size_t plane = s.h * s.w;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[(i / plane) % s.c];
  return tape.record(std::move(out), {x, bias}, [plane, c = s.c](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) {
      auto d = ctx.input_grad(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (ctx.needs_grad(1)) {
      auto d = ctx.input_grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) d[(i / plane) % c] += g[i];
    }
  });
}

Var add_channel_vector(Var x, Var v) {
  Tape& tape = same_tape(x, v);
  const Tensor& xv = x.value();
  const Tensor& vv = v.value();
  const Nchw s = require_rank4(xv.shape(), "add_channel_vector");
  if (vv.rank() != 2 || vv.dim(0) != s.b || vv.dim(1) != s.c) {
    throw DimensionError("add_channel_vector: " + shape_to_string(vv.shape()) +
                         " does not match " + shape_to_string(xv.shape()));
  }
  const std::size_t plane = s.h * s.w;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vv[i / plane];
  return tape.record(std::move(out), {x, v}, [plane](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) {
      auto d = ctx.input_grad(0);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (ctx.needs_grad(1)) {
      auto d = ctx.input_grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) d[i / plane] += g[i];
    }
  });
}

Var avg_pool2(Var x) {
  const Tensor& xv = x.value();
  const Nchw s = require_rank4(xv.shape(), "avg_pool2");
  if (s.h % 2 || s.w % 2) {
    throw DimensionError("avg_pool2 needs even spatial size, got " + shape_to_string(xv.shape()));
  }
  const std::size_t oh = s.h / 2, ow = s.w / 2;
  Tensor out({s.b, s.c, oh, ow});
  for (std::size_t p = 0; p < s.b * s.c; ++p) {
    const double* in = xv.data().data() + p * s.h * s.w;
    double* o = out.data().data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double* r0 = in + 2 * i * s.w + 2 * j;
        o[i * ow + j] = 0.25 * (r0[0] + r0[1] + r0[s.w] + r0[s.w + 1]);
      }
    }
  }
  return x.tape->record(std::move(out), {x}, [s, oh, ow](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    for (std::size_t p = 0; p < s.b * s.c; ++p) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          const double gv = 0.25 * g[p * oh * ow + i * ow + j];
          const std::size_t base = p * s.h * s.w + 2 * i * s.w + 2 * j;
          d[base] += gv;
          d[base + 1] += gv;
          d[base + s.w] += gv;
          d[base + s.w + 1] += gv;
        }
      }
    }
  });
}

Var upsample2(Var x) {
  const Tensor& xv = x.value();
  const Nchw s = require_rank4(xv.shape(), "upsample2");
  const std::size_t oh = 2 * s.h, ow = 2 * s.w;
  Tensor out({s.b, s.c, oh, ow});
  for (std::size_t p = 0; p < s.b * s.c; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        out[p * oh * ow + i * ow + j] = xv[p * s.h * s.w + (i / 2) * s.w + j / 2];
      }
    }
  }
  return x.tape->record(std::move(out), {x}, [s, oh, ow](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    for (std::size_t p = 0; p < s.b * s.c; ++p) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          d[p * s.h * s.w + (i / 2) * s.w + j / 2] += g[p * oh * ow + i * ow + j];
        }
      }
    }
  });
}

Var concat_channels(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Nchw sa = require_rank4(av.shape(), "concat_channels");
  const Nchw sb = require_rank4(bv.shape(), "concat_channels");
  if (sa.b != sb.b || sa.h != sb.h || sa.w != sb.w) {
    throw DimensionError("concat_channels: " + shape_to_string(av.shape()) + " vs " +
                         shape_to_string(bv.shape()));
  }
  const std::size_t na = sa.c * sa.h * sa.w;
  const std::size_t nb = sb.c * sb.h * sb.w;
  Tensor out({sa.b, sa.c + sb.c, sa.h, sa.w});
  for (std::size_t n = 0; n < sa.b; ++n) {
    std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(n * na), na,
                out.data().begin() + static_cast<std::ptrdiff_t>(n * (na + nb)));
    std::copy_n(bv.data().begin() + static_cast<std::ptrdiff_t>(n * nb), nb,
                out.data().begin() + static_cast<std::ptrdiff_t>(n * (na + nb) + na));
  }
  return tape.record(std::move(out), {a, b}, [na, nb, batch = sa.b](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) {
      auto d = ctx.input_grad(0);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < na; ++i) d[n * na + i] += g[n * (na + nb) + i];
      }
    }
    if (ctx.needs_grad(1)) {
      auto d = ctx.input_grad(1);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t i = 0; i < nb; ++i) d[n * nb + i] += g[n * (na + nb) + na + i];
      }
    }
  });
}

Var squared_error(Var a, Var b) { return sum(square(sub(a, b))); }

}  // namespace ops

}  // namespace dmt
