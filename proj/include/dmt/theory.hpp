#pragma once

// Closed-form checks of the translation objective on a jointly Gaussian
// (x0, y0) world, where every density in the bound is Gaussian. Conventions:
//   forward chains   x_i = sqrt(a_i) x_{i-1} + sqrt(b_i) e^x_i (same for y,
//                    independent noise), q(y_{j-1} | y_j) the exact reverse
//                    kernel of the y chain under the world's y0 marginal;
//   translator       p(y_t | x_s) = N(A x_s + b, (1 - ab_t) I);
//   sampler          y_{j-1} | y_j uses the exact reverse kernel with its
//                    covariance multiplied by sigma_scale^2 (1 = exact).

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dmt/models.hpp"
#include "dmt/schedule.hpp"
#include "dmt/tensor.hpp"

namespace dmt::theory {

/// Gaussian conditional a | b = N(M b + c, S).
struct Conditional {
  Eigen::MatrixXd M;
  Eigen::VectorXd c;
  Eigen::MatrixXd S;
};

/// f(x) = A x + b (column-vector convention).
struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct LinearGaussianWorld {
  int d = 1;
  Eigen::VectorXd mean;  // (x0, y0), length 2d
  Eigen::MatrixXd cov;   // 2d x 2d
  NoiseSchedule sched = linear_schedule(4, 0.1, 0.4);

  /// PSD joint covariance, T <= 5, d <= 2, x0 and y0 not identical.
  void validate() const;

  /// Random world: y0 = G x0 + g + e with e independent noise; y0 variances
  /// stay well away from 1 and posteriors are broad enough for C >= 0.
  static LinearGaussianWorld random(std::uint64_t seed, int d = 2);

  /// n i.i.d. draws as [n, d] tensors.
  struct Samples {
    Tensor x0;
    Tensor y0;
  };
  Samples sample(std::size_t n, std::uint64_t seed) const;
};

/// 1-D Gaussian helpers, also used as hand-formula oracles in tests.
double gaussian_entropy(const Eigen::MatrixXd& cov);
double gaussian_kl(const Eigen::VectorXd& m0, const Eigen::MatrixXd& S0, const Eigen::VectorXd& m1,
                   const Eigen::MatrixXd& S1);
/// Conditional of block `a` on block `b` of a joint Gaussian.
Conditional condition(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                      const std::vector<int>& a, const std::vector<int>& b);

/// x_s -> sqrt(ab_t) E[y0 | x_s], with x_s = sqrt(ab_s) x0 + sqrt(1-ab_s) z.
AffineMap closed_form_optimal_mean(const LinearGaussianWorld& w, int s, int t);
inline AffineMap closed_form_optimal_mean(const LinearGaussianWorld& w, int t) {
  return closed_form_optimal_mean(w, t, t);
}

/// Affine translator parameters as a column-convention map.
AffineMap affine_from_model(const Model& m);

/// L_VLB for p(y_t | x_s) under the exact reverse kernels.
double vlb(const LinearGaussianWorld& w, int s, int t, const AffineMap& theta);
/// E || sqrt(ab_t) y0 - A x_s - b ||^2 / (2 (1 - ab_t)).
double kl_term(const LinearGaussianWorld& w, int s, int t, const AffineMap& theta);
/// E[H(q(y0 | y_t))], by conditioning y0 on y_t directly.
double entropy_term(const LinearGaussianWorld& w, int t);
/// -E log p(y0 | x0) with the whole chain marginalized.
double nll(const LinearGaussianWorld& w, int s, int t, const AffineMap& theta,
           double sigma_scale = 1.0);
/// L2 distance (over the law of x_s under shared noise) between the mean
/// implied by f, E[f(x_s) - sqrt(1-ab_t) z | x_s], and sqrt(ab_t) E[y0 | x_s].
double implied_mean_gap(const LinearGaussianWorld& w, int s, int t, const AffineMap& theta);

/// Trains an affine translator on n draws from the world with the shared-noise
/// objective (a fixed total step budget split over three learning rates) and
/// returns its implied-mean gap.
double trained_mean_gap(const LinearGaussianWorld& w, int s, int t, std::size_t n,
                        std::uint64_t seed);

struct CheckReport {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

/// Random affine maps around the identity.
std::vector<AffineMap> random_thetas(int d, std::size_t count, std::uint64_t seed);

/// max over thetas of nll - vlb must stay <= 1e-8 (measured is the max).
CheckReport check_vlb_bound(const LinearGaussianWorld& w, int s, int t,
                              const std::vector<AffineMap>& thetas, double sigma_scale);
/// vlb - kl_term equal across thetas, equal to entropy_term, and >= 0.
CheckReport check_constant(const std::string& name, const LinearGaussianWorld& w, int s, int t,
                           const std::vector<AffineMap>& thetas);
/// Trains with n samples; gap must be < 1e-2.
CheckReport check_optimal_mean(const std::string& name, const LinearGaussianWorld& w, int s, int t,
                               std::size_t n, std::uint64_t seed);

struct SuiteOptions {
  std::uint64_t world_seed = 0;
  double sigma_scale = 1.0;
  std::size_t train_samples = 100000;
  int s = 2;
  int t = 3;
};

std::vector<CheckReport> run_suite(const SuiteOptions& opt);
nlohmann::json report_json(const std::vector<CheckReport>& reports, const SuiteOptions& opt);

}  // namespace dmt::theory
