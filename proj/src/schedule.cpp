#include "dmt/schedule.hpp"

#include <cmath>
#include <string>

#include "dmt/errors.hpp"

namespace dmt {

NoiseSchedule::NoiseSchedule(int T, double beta_start, double beta_end)
    : T_(T), beta_start_(beta_start), beta_end_(beta_end) {
  if (T < 1) throw ValidationError("schedule needs T >= 1, got " + std::to_string(T));
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ValidationError("schedule needs 0 < beta_start <= beta_end < 1, got " +
                          std::to_string(beta_start) + ", " + std::to_string(beta_end));
  }
  betas_.assign(static_cast<std::size_t>(T) + 1, 0.0);
  alphas_.assign(static_cast<std::size_t>(T) + 1, 1.0);
  alpha_bars_.assign(static_cast<std::size_t>(T) + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
    const auto i = static_cast<std::size_t>(t);
    betas_[i] = beta_start + frac * (beta_end - beta_start);
    alphas_[i] = 1.0 - betas_[i];
    alpha_bars_[i] = alpha_bars_[i - 1] * alphas_[i];
  }
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > T_) {
    throw IndexError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T_) + "]");
  }
}

void NoiseSchedule::check_time(int t) const {
  if (t < 0 || t > T_) {
    throw IndexError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(T_) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_step(t);
  return betas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha(int t) const {
  check_step(t);
  return alphas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_time(t);
  return alpha_bars_[static_cast<std::size_t>(t)];
}

nlohmann::json NoiseSchedule::to_json() const {
  return {{"T", T_}, {"beta_start", beta_start_}, {"beta_end", beta_end_}, {"kind", "linear"}};
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "linear") {
      throw ValidationError("unsupported schedule kind " + j.at("kind").dump());
    }
    return NoiseSchedule(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                         j.at("beta_end").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed schedule: ") + e.what());
  }
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
  return NoiseSchedule(T, beta_start, beta_end);
}

NoiseSchedule scaled_linear_schedule(int T) {
  if (T < 1) throw ValidationError("schedule needs T >= 1, got " + std::to_string(T));
  const double scale = 1000.0 / T;
  return NoiseSchedule(T, 1e-4 * scale, 0.02 * scale);
}

MarginalCoeffs marginal_coeffs(const NoiseSchedule& s, int t) {
  const double ab = s.alpha_bar(t);
  return {std::sqrt(ab), std::sqrt(1.0 - ab)};
}

double posterior_sigma(const NoiseSchedule& s, int i) {
  const double beta = s.beta(i);
  const double var = beta * (1.0 - s.alpha_bar(i - 1)) / (1.0 - s.alpha_bar(i));
  return std::sqrt(var);
}

double reverse_sigma(const NoiseSchedule& s, int i, SigmaKind kind) {
  return kind == SigmaKind::posterior ? posterior_sigma(s, i) : std::sqrt(s.beta(i));
}

}  // namespace dmt
