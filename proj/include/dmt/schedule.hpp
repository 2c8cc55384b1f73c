#pragma once

#include <vector>

#include <json.hpp>

namespace dmt {

/// Linear variance schedule with tables for t = 0..T. alpha_bar(0) == 1, so
/// t = 0 means "no diffusion".
class NoiseSchedule {
 public:
  NoiseSchedule(int T, double beta_start, double beta_end);

  int T() const noexcept { return T_; }
  double beta_start() const noexcept { return beta_start_; }
  double beta_end() const noexcept { return beta_end_; }

  /// 1 <= t <= T
  double beta(int t) const;
  double alpha(int t) const;
  /// 0 <= t <= T
  double alpha_bar(int t) const;

  nlohmann::json to_json() const;
  static NoiseSchedule from_json(const nlohmann::json& j);

  friend bool operator==(const NoiseSchedule& a, const NoiseSchedule& b) noexcept {
    return a.T_ == b.T_ && a.beta_start_ == b.beta_start_ && a.beta_end_ == b.beta_end_;
  }

 private:
  void check_step(int t) const;
  void check_time(int t) const;

  int T_;
  double beta_start_;
  double beta_end_;
  std::vector<double> betas_;       // index t, entry 0 unused
  std::vector<double> alphas_;      // index t, entry 0 unused
  std::vector<double> alpha_bars_;  // index t
};

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end);

/// The usual 1e-4 -> 0.02 schedule for T = 1000, with both endpoints scaled by
/// 1000/T so that a shorter chain still ends near pure noise.
NoiseSchedule scaled_linear_schedule(int T);

struct MarginalCoeffs {
  double sqrt_ab;
  double sqrt_one_minus_ab;
};

MarginalCoeffs marginal_coeffs(const NoiseSchedule& s, int t);

/// sqrt(beta_i (1 - alpha_bar_{i-1}) / (1 - alpha_bar_i)); zero at i = 1.
double posterior_sigma(const NoiseSchedule& s, int i);

enum class SigmaKind { posterior, beta };

double reverse_sigma(const NoiseSchedule& s, int i, SigmaKind kind);

}  // namespace dmt
