#include "dmt/models.hpp"

#include <cmath>

#include "dmt/errors.hpp"
#include "dmt/rng.hpp"

namespace dmt {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::mlp: return "mlp";
    case Architecture::conv: return "conv";
    case Architecture::affine: return "affine";
  }
  return "?";
}

std::string to_string(ModelRole r) { return r == ModelRole::denoiser ? "denoiser" : "translator"; }

namespace {

Architecture parse_arch(const std::string& s) {
  if (s == "mlp") return Architecture::mlp;
  if (s == "conv") return Architecture::conv;
  if (s == "affine") return Architecture::affine;
  throw ValidationError("unknown architecture '" + s + "'");
}

ModelRole parse_role(const std::string& s) {
  if (s == "denoiser") return ModelRole::denoiser;
  if (s == "translator") return ModelRole::translator;
  throw ValidationError("unknown model role '" + s + "'");
}

}  // namespace

void ModelDescriptor::validate() const {
  if (arch == Architecture::conv) {
    if (sample_shape.size() != 3) {
      throw ValidationError("conv models need [c,h,w] samples, got " +
                            shape_to_string(sample_shape));
    }
    if (sample_shape[1] % 4 || sample_shape[2] % 4 || sample_shape[1] == 0 ||
        sample_shape[2] == 0) {
      throw ValidationError("conv models need h and w divisible by 4, got " +
                            shape_to_string(sample_shape));
    }
    if (channels.size() != 3) throw ValidationError("conv models take three channel widths");
    for (int c : channels) {
      if (c < 1) throw ValidationError("channel widths must be positive");
    }
  } else {
    if (sample_shape.size() != 1 || sample_shape[0] == 0) {
      throw ValidationError(to_string(arch) + " models need [d] samples, got " +
                            shape_to_string(sample_shape));
    }
    if (arch == Architecture::mlp && hidden < 1) throw ValidationError("hidden width must be positive");
    if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
      throw ValidationError("input_scale must be positive");
    }
  }
  if (arch == Architecture::affine && role == ModelRole::denoiser) {
    throw ValidationError("affine architecture is only available for translators");
  }
  if (role == ModelRole::denoiser && (time_dim < 2 || time_dim % 2)) {
    throw ValidationError("time embedding size must be even and >= 2");
  }
}

nlohmann::json ModelDescriptor::to_json() const {
  nlohmann::json j{{"arch", to_string(arch)},
                   {"role", to_string(role)},
                   {"sample_shape", sample_shape}};
  if (arch == Architecture::mlp) {
    j["hidden"] = hidden;
    j["input_scale"] = input_scale;
  }
  if (arch == Architecture::conv) j["channels"] = channels;
  if (role == ModelRole::denoiser) j["time_dim"] = time_dim;
  return j;
}

ModelDescriptor ModelDescriptor::from_json(const nlohmann::json& j) {
  ModelDescriptor d;
  try {
    d.arch = parse_arch(j.at("arch").get<std::string>());
    d.role = parse_role(j.at("role").get<std::string>());
    d.sample_shape = j.at("sample_shape").get<Shape>();
    if (j.contains("hidden")) d.hidden = j.at("hidden").get<int>();
    if (j.contains("channels")) d.channels = j.at("channels").get<std::vector<int>>();
    if (j.contains("time_dim")) d.time_dim = j.at("time_dim").get<int>();
    if (j.contains("input_scale")) d.input_scale = j.at("input_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

ModelDescriptor default_descriptor(ModelRole role, const Shape& sample_shape) {
  ModelDescriptor d;
  d.role = role;
  d.sample_shape = sample_shape;
  d.arch = sample_shape.size() == 3 ? Architecture::conv : Architecture::mlp;
  d.validate();
  return d;
}

Tensor time_embedding(std::span<const int> ts, int dim) {
  const std::size_t half = static_cast<std::size_t>(dim) / 2;
  Tensor out({ts.size(), static_cast<std::size_t>(dim)});
  for (std::size_t r = 0; r < ts.size(); ++r) {
    for (std::size_t k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / half);
      const double arg = ts[r] * freq;
      out[r * dim + k] = std::sin(arg);
      out[r * dim + half + k] = std::cos(arg);
    }
  }
  return out;
}

void Model::add_param(std::string name, Shape shape) {
  names_.push_back(std::move(name));
  params_.emplace_back(std::move(shape));
}

Model::Model(ModelDescriptor descriptor, std::uint64_t init_seed) : desc_(std::move(descriptor)) {
  desc_.validate();
  const bool denoiser = desc_.role == ModelRole::denoiser;
  const auto E = static_cast<std::size_t>(desc_.time_dim);
  // Names ending in ".w" are weights; the last weight is the output layer.
  if (desc_.arch == Architecture::affine) {
    const std::size_t d = desc_.sample_shape[0];
    add_param("affine.w", {d, d});
    add_param("affine.b", {d});
  } else if (desc_.arch == Architecture::mlp) {
    const std::size_t d = desc_.sample_shape[0];
    const auto H = static_cast<std::size_t>(desc_.hidden);
    add_param("fc1.w", {d, H});
    add_param("fc1.b", {H});
    if (denoiser) add_param("time.w", {E, H});
    add_param("fc2.w", {H, H});
    add_param("fc2.b", {H});
    add_param("out.w", {H, d});
    add_param("out.b", {d});
  } else {
    const std::size_t c = desc_.sample_shape[0];
    const auto c1 = static_cast<std::size_t>(desc_.channels[0]);
    const auto c2 = static_cast<std::size_t>(desc_.channels[1]);
    const auto c3 = static_cast<std::size_t>(desc_.channels[2]);
    auto conv = [&](const std::string& name, std::size_t ci, std::size_t co) {
      add_param(name + ".w", {co, ci, 3, 3});
      add_param(name + ".b", {co});
    };
    conv("enc1a", c, c1);
    conv("enc1b", c1, c1);
    conv("enc2a", c1, c2);
    conv("enc2b", c2, c2);
    conv("mid_a", c2, c3);
    if (denoiser) {
      add_param("time.w", {E, c3});
      add_param("time.b", {c3});
    }
    conv("mid_b", c3, c3);
    conv("dec2", c3 + c2, c2);
    conv("dec1", c2 + c1, c1);
    conv("out", c1, c);
  }

  CounterRng rng(init_seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const std::string& name = names_[i];
    const bool is_out = name.rfind("out.", 0) == 0;
    if (name.ends_with(".b") || is_out) continue;  // biases and output layer start at zero
    if (name == "affine.w") {
      const std::size_t d = p.dim(0);
      for (std::size_t k = 0; k < d; ++k) p[k * d + k] = 1.0;
      continue;
    }
    // Unit-gain Kaiming-uniform: Var(w) = 1 / fan_in.
    const std::size_t fan_in = p.rank() == 4 ? p.dim(1) * 9 : p.dim(0);
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (double& v : p.data()) v = rng.uniform(-bound, bound);
  }
}

std::size_t Model::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

void Model::set_requires_grad(bool on) {
  for (Tensor& p : params_) p.set_requires_grad(on);
}

template <class Bind>
Var Model::run_mlp(Tape& tape, Var x, std::span<const int> ts, std::size_t batch,
                   Bind bind) const {
  std::size_t k = 0;
  if (desc_.arch == Architecture::affine) {
    return ops::add_bias(ops::matmul(x, bind(0)), bind(1));
  }
  Var in = desc_.input_scale == 1.0 ? x : ops::scale(x, desc_.input_scale);
  Var pre = ops::add_bias(ops::matmul(in, bind(k)), bind(k + 1));
  k += 2;
  if (desc_.role == ModelRole::denoiser) {
    std::vector<int> rows(ts.begin(), ts.end());
    if (rows.size() == 1 && batch > 1) rows.assign(batch, ts[0]);
    Var emb = tape.constant(time_embedding(rows, desc_.time_dim));
    pre = ops::add(pre, ops::matmul(emb, bind(k++)));
  }
  Var h = ops::tanh(pre);
  h = ops::tanh(ops::add_bias(ops::matmul(h, bind(k)), bind(k + 1)));
  k += 2;
  Var out = ops::add_bias(ops::matmul(h, bind(k)), bind(k + 1));
  if (desc_.role == ModelRole::translator) out = ops::add(x, out);
  return out;
}

template <class Bind>
Var Model::run_conv(Tape& tape, Var x, std::span<const int> ts, std::size_t batch,
                    Bind bind) const {
  std::size_t k = 0;
  auto conv = [&](Var in) {
    Var out = ops::add_channel_bias(ops::conv2d(in, bind(k)), bind(k + 1));
    k += 2;
    return out;
  };
  Var s1 = ops::silu(conv(ops::silu(conv(x))));
  Var s2 = ops::silu(conv(ops::silu(conv(ops::avg_pool2(s1)))));
  Var mid = conv(ops::avg_pool2(s2));
  if (desc_.role == ModelRole::denoiser) {
    std::vector<int> rows(ts.begin(), ts.end());
    if (rows.size() == 1 && batch > 1) rows.assign(batch, ts[0]);
    Var emb = tape.constant(time_embedding(rows, desc_.time_dim));
    Var temb = ops::add_bias(ops::matmul(emb, bind(k)), bind(k + 1));
    k += 2;
    mid = ops::add_channel_vector(mid, temb);
  }
  mid = ops::silu(conv(ops::silu(mid)));
  Var d2 = ops::silu(conv(ops::concat_channels(ops::upsample2(mid), s2)));
  Var d1 = ops::silu(conv(ops::concat_channels(ops::upsample2(d2), s1)));
  Var out = conv(d1);
  if (desc_.role == ModelRole::translator) out = ops::add(x, out);
  return out;
}

template <class Bind>
Var Model::run(Tape& tape, Var x, std::span<const int> ts, Bind bind) const {
  const Shape& in_shape = x.shape();
  const Shape& sample = desc_.sample_shape;
  std::size_t batch = 1;
  bool batched = false;
  if (in_shape == sample) {
    batched = false;
  } else if (in_shape.size() == sample.size() + 1 &&
             std::equal(sample.begin(), sample.end(), in_shape.begin() + 1)) {
    batched = true;
    batch = in_shape[0];
  } else {
    throw DimensionError("model expects samples of shape " + shape_to_string(sample) + ", got " +
                         shape_to_string(in_shape));
  }
  if (desc_.role == ModelRole::denoiser) {
    if (ts.size() != 1 && ts.size() != batch) {
      throw DimensionError("denoiser needs one timestep or one per row; got " +
                           std::to_string(ts.size()) + " for batch " + std::to_string(batch));
    }
  } else if (!ts.empty()) {
    throw ContractError("translators take no timestep");
  }

  Shape work_shape{batch};
  work_shape.insert(work_shape.end(), sample.begin(), sample.end());
  Var xb = batched ? x : ops::reshape(x, work_shape);
  Var out = desc_.arch == Architecture::conv ? run_conv(tape, xb, ts, batch, bind)
                                             : run_mlp(tape, xb, ts, batch, bind);
  return batched ? out : ops::reshape(out, in_shape);
}

Var Model::forward(Tape& tape, Var x, std::span<const int> ts) {
  std::vector<Var> bound;
  bound.reserve(params_.size());
  for (Tensor& p : params_) bound.push_back(tape.parameter(p));
  return run(tape, x, ts, [&](std::size_t i) { return bound[i]; });
}

Tensor Model::predict(const Tensor& x, int t) const {
  if (desc_.role != ModelRole::denoiser) throw ContractError("predict needs a denoiser");
  if (t < 1) throw IndexError("denoiser timestep must be >= 1, got " + std::to_string(t));
  Tape tape;
  std::vector<Var> bound;
  for (const Tensor& p : params_) bound.push_back(tape.constant_ref(p));
  const int ts[1] = {t};
  Var out = run(tape, tape.constant_ref(x), ts, [&](std::size_t i) { return bound[i]; });
  return out.value();
}

Tensor Model::translate(const Tensor& x) const {
  if (desc_.role != ModelRole::translator) throw ContractError("translate needs a translator");
  Tape tape;
  std::vector<Var> bound;
  for (const Tensor& p : params_) bound.push_back(tape.constant_ref(p));
  Var out = run(tape, tape.constant_ref(x), {}, [&](std::size_t i) { return bound[i]; });
  return out.value();
}

}  // namespace dmt
