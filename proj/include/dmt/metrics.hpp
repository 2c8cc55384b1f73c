#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

#include "dmt/tensor.hpp"

namespace dmt {

struct SsimOptions {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Width of the value range; 2 for data in [-1, 1].
  double dynamic_range = 2.0;
};

/// Mean SSIM over all valid (fully inside) uniform windows, averaged over
/// channels. Accepts [h, w] or [c, h, w]; rank-1 inputs use global moments.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {});

/// 10 log10(R^2 / MSE), capped at 99 dB.
double psnr(const Tensor& a, const Tensor& b, double dynamic_range = 2.0);
/// Mean absolute difference.
double l1(const Tensor& a, const Tensor& b);
/// Root-mean-square difference.
double l2(const Tensor& a, const Tensor& b);

enum class Featurizer { flatten, avgpool4 };

Featurizer parse_featurizer(const std::string& name);
/// flatten for vectors, avgpool4 for images.
Featurizer default_featurizer(const Shape& sample_shape);

/// Feature vector of one sample. avgpool4 averages 4x4 blocks per channel.
Eigen::VectorXd featurize(const Tensor& sample, Featurizer f);

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n = 0;
};

/// Mean and unbiased covariance over the leading axis of `batch`.
FeatureStats feature_stats(const Tensor& batch, Featurizer f);
FeatureStats feature_stats(std::span<const Tensor> samples, Featurizer f);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), clamped at 0.
double frechet_distance(const FeatureStats& p, const FeatureStats& q);

/// Frechet distance between toy feature statistics of two batches.
double toy_fid(const Tensor& batch_a, const Tensor& batch_b, Featurizer f);

}  // namespace dmt
