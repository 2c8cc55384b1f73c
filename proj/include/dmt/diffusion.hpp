#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dmt/rng.hpp"
#include "dmt/schedule.hpp"
#include "dmt/tensor.hpp"

namespace dmt {

/// sqrt(ab_t) x0 + sqrt(1 - ab_t) z
Tensor diffuse(const Tensor& x0, int t, const Tensor& z, const NoiseSchedule& s);

struct DiffusedPair {
  Tensor x_t;
  Tensor y_t;
  int t = 0;
  Tensor shared_noise;
};

/// Diffuses both x0 and y0 to step t with the same noise z.
DiffusedPair diffuse_pair(const Tensor& x0, const Tensor& y0, int t, const Tensor& z,
                          const NoiseSchedule& s);

struct AsymmetricPair {
  Tensor x_s;
  Tensor y_t;
};

/// x0 to step s_step and y0 to step t_step, same noise z.
AsymmetricPair diffuse_pair_asym(const Tensor& x0, const Tensor& y0, int s_step, int t_step,
                                 const Tensor& z, const NoiseSchedule& sched);

/// One ancestral step i -> i-1. `noise` must be all zero at i == 1.
Tensor ddpm_step(const Tensor& y_i, int i, const Tensor& eps_pred, const Tensor& noise,
                 const NoiseSchedule& sched, SigmaKind sigma = SigmaKind::posterior);

/// Deterministic (eta = 0) jump t_from -> t_to.
Tensor ddim_step(const Tensor& y_t, int t_from, int t_to, const Tensor& eps_pred,
                 const NoiseSchedule& sched);

/// Descending visit list t_start = tau_n > ... > tau_0 = 0 with uniform integer
/// strides; uses min(n_steps, t_start) jumps.
std::vector<int> ddim_timesteps(int t_start, int n_steps);

struct SamplerSpec {
  enum class Kind { ancestral, ddim };
  Kind kind = Kind::ancestral;
  int steps = 10;
  SigmaKind sigma = SigmaKind::posterior;

  /// "ancestral" or "ddim:<n>"
  static SamplerSpec parse(const std::string& text);
  std::string to_string() const;
};

/// eps_theta(y, t); y may carry a leading batch axis.
using NoisePredictor = std::function<Tensor(const Tensor& y, int t)>;

struct SampleResult {
  Tensor y;
  int nfe = 0;
};

/// Runs the chosen stepper from t_start to 0. `streams` supplies ancestral
/// noise: one stream fills the whole tensor, otherwise stream r fills row r of
/// the leading axis (so a batched call equals per-row calls).
SampleResult sample_from(const Tensor& y_start, int t_start, const NoisePredictor& model,
                         const SamplerSpec& spec, const NoiseSchedule& sched,
                         std::span<CounterRng> streams);

SampleResult sample_from(const Tensor& y_start, int t_start, const NoisePredictor& model,
                         const SamplerSpec& spec, const NoiseSchedule& sched,
                         std::uint64_t seed);

/// Normal draws shaped like `shape`, row r taken from streams[r] (or all from
/// streams[0] when there is one stream).
Tensor draw_normal(const Shape& shape, std::span<CounterRng> streams);

}  // namespace dmt
