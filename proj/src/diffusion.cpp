#include "dmt/diffusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "dmt/errors.hpp"

namespace dmt {

Tensor diffuse(const Tensor& x0, int t, const Tensor& z, const NoiseSchedule& s) {
  require_same_shape(x0, z, "diffuse");
  const auto [a, b] = marginal_coeffs(s, t);
  return axpby(a, x0, b, z);
}

DiffusedPair diffuse_pair(const Tensor& x0, const Tensor& y0, int t, const Tensor& z,
                          const NoiseSchedule& s) {
  require_same_shape(x0, y0, "diffuse_pair");
  return {diffuse(x0, t, z, s), diffuse(y0, t, z, s), t, z};
}

AsymmetricPair diffuse_pair_asym(const Tensor& x0, const Tensor& y0, int s_step, int t_step,
                                 const Tensor& z, const NoiseSchedule& sched) {
  require_same_shape(x0, y0, "diffuse_pair_asym");
  return {diffuse(x0, s_step, z, sched), diffuse(y0, t_step, z, sched)};
}

Tensor ddpm_step(const Tensor& y_i, int i, const Tensor& eps_pred, const Tensor& noise,
                 const NoiseSchedule& sched, SigmaKind sigma) {
  if (i < 1) throw ContractError("ddpm_step needs i >= 1, got " + std::to_string(i));
  require_same_shape(y_i, eps_pred, "ddpm_step");
  require_same_shape(y_i, noise, "ddpm_step");
  if (i == 1) {
    for (double v : noise.data()) {
      if (v != 0.0) throw ContractError("ddpm_step: the final step (i == 1) takes zero noise");
    }
  }
  const double alpha = sched.alpha(i);
  const double coef = (1.0 - alpha) / std::sqrt(1.0 - sched.alpha_bar(i));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double sig = reverse_sigma(sched, i, sigma);
  Tensor out(y_i.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (y_i[k] - coef * eps_pred[k]) * inv_sqrt_alpha + sig * noise[k];
  }
  return out;
}

Tensor ddim_step(const Tensor& y_t, int t_from, int t_to, const Tensor& eps_pred,
                 const NoiseSchedule& sched) {
  if (!(0 <= t_to && t_to < t_from && t_from <= sched.T())) {
    throw ContractError("ddim_step needs 0 <= t_to < t_from <= T, got " + std::to_string(t_from) +
                        " -> " + std::to_string(t_to));
  }
  require_same_shape(y_t, eps_pred, "ddim_step");
  const auto from = marginal_coeffs(sched, t_from);
  const auto to = marginal_coeffs(sched, t_to);
  Tensor out(y_t.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double x0_hat = (y_t[k] - from.sqrt_one_minus_ab * eps_pred[k]) / from.sqrt_ab;
    out[k] = to.sqrt_ab * x0_hat + to.sqrt_one_minus_ab * eps_pred[k];
  }
  return out;
}

std::vector<int> ddim_timesteps(int t_start, int n_steps) {
  if (t_start < 0) throw ContractError("ddim_timesteps needs t_start >= 0");
  if (n_steps < 1) throw ValidationError("ddim needs at least one step");
  const int n = std::min(n_steps, t_start);
  std::vector<int> taus;
  for (int k = n; k >= 0; --k) {
    // Integer rounding of k * t_start / n; strictly decreasing because t_start >= n.
    taus.push_back(n == 0 ? 0 : static_cast<int>((2LL * k * t_start + n) / (2LL * n)));
  }
  return taus;
}

SamplerSpec SamplerSpec::parse(const std::string& text) {
  SamplerSpec spec;
  if (text == "ancestral") return spec;
  const std::string prefix = "ddim:";
  if (text.rfind(prefix, 0) == 0) {
    int n = 0;
    const char* first = text.data() + prefix.size();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec == std::errc() && ptr == last && n >= 1) {
      spec.kind = Kind::ddim;
      spec.steps = n;
      return spec;
    }
  }
  throw ValidationError("sampler must be 'ancestral' or 'ddim:<n>' with n >= 1, got '" + text +
                        "'");
}

std::string SamplerSpec::to_string() const {
  return kind == Kind::ancestral ? "ancestral" : "ddim:" + std::to_string(steps);
}

Tensor draw_normal(const Shape& shape, std::span<CounterRng> streams) {
  Tensor out(shape);
  if (streams.empty()) throw ContractError("draw_normal needs at least one stream");
  if (streams.size() == 1) {
    streams[0].fill_normal(out.data());
    return out;
  }
  if (shape.empty() || shape[0] != streams.size()) {
    throw DimensionError("draw_normal: " + std::to_string(streams.size()) +
                         " streams for shape " + shape_to_string(shape));
  }
  const std::size_t row = out.size() / shape[0];
  for (std::size_t r = 0; r < streams.size(); ++r) {
    streams[r].fill_normal(out.data().subspan(r * row, row));
  }
  return out;
}

SampleResult sample_from(const Tensor& y_start, int t_start, const NoisePredictor& model,
                         const SamplerSpec& spec, const NoiseSchedule& sched,
                         std::span<CounterRng> streams) {
  if (t_start < 0 || t_start > sched.T()) {
    throw IndexError("sampler start " + std::to_string(t_start) + " outside [0, " +
                     std::to_string(sched.T()) + "]");
  }
  SampleResult result{y_start, 0};
  if (spec.kind == SamplerSpec::Kind::ddim) {
    const std::vector<int> taus = ddim_timesteps(t_start, spec.steps);
    for (std::size_t k = 0; k + 1 < taus.size(); ++k) {
      const Tensor eps = model(result.y, taus[k]);
      ++result.nfe;
      result.y = ddim_step(result.y, taus[k], taus[k + 1], eps, sched);
    }
    return result;
  }
  for (int i = t_start; i >= 1; --i) {
    const Tensor eps = model(result.y, i);
    ++result.nfe;
    const Tensor noise = i > 1 ? draw_normal(result.y.shape(), streams) : Tensor(result.y.shape());
    result.y = ddpm_step(result.y, i, eps, noise, sched, spec.sigma);
  }
  return result;
}

SampleResult sample_from(const Tensor& y_start, int t_start, const NoisePredictor& model,
                         const SamplerSpec& spec, const NoiseSchedule& sched,
                         std::uint64_t seed) {
  CounterRng rng(seed);
  return sample_from(y_start, t_start, model, spec, sched, std::span<CounterRng>(&rng, 1));
}

}  // namespace dmt
