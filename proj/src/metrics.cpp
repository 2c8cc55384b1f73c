#include "dmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dmt/errors.hpp"

namespace dmt {

namespace {

double ssim_from_moments(double ma, double mb, double va, double vb, double cab, double c1,
                         double c2) {
  return ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) /
         ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

double ssim_plane(const double* a, const double* b, std::size_t h, std::size_t w, std::size_t win,
                  double c1, double c2) {
  const double inv = 1.0 / static_cast<double>(win * win);
  double total = 0.0;
  for (std::size_t y0 = 0; y0 + win <= h; ++y0) {
    for (std::size_t x0 = 0; x0 + win <= w; ++x0) {
      double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (std::size_t y = y0; y < y0 + win; ++y) {
        for (std::size_t x = x0; x < x0 + win; ++x) {
          const double va = a[y * w + x];
          const double vb = b[y * w + x];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const double ma = sa * inv, mb = sb * inv;
      total += ssim_from_moments(ma, mb, saa * inv - ma * ma, sbb * inv - mb * mb,
                                 sab * inv - ma * mb, c1, c2);
    }
  }
  const std::size_t count = (h - win + 1) * (w - win + 1);
  return total / static_cast<double>(count);
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt) {
  require_same_shape(a, b, "ssim");
  if (a.size() == 0) throw ContractError("ssim of empty tensors");
  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
  const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);
  if (a.rank() == 1) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      va += (a[i] - ma) * (a[i] - ma);
      vb += (b[i] - mb) * (b[i] - mb);
      cab += (a[i] - ma) * (b[i] - mb);
    }
    return ssim_from_moments(ma, mb, va / n, vb / n, cab / n, c1, c2);
  }
  std::size_t c = 1, h = 0, w = 0;
  if (a.rank() == 2) {
    h = a.dim(0);
    w = a.dim(1);
  } else if (a.rank() == 3) {
    c = a.dim(0);
    h = a.dim(1);
    w = a.dim(2);
  } else {
    throw DimensionError("ssim expects [d], [h,w] or [c,h,w], got " + shape_to_string(a.shape()));
  }
  if (opt.window < 1 || opt.window % 2 == 0) {
    throw ValidationError("ssim window must be odd and positive");
  }
  const auto win = static_cast<std::size_t>(opt.window);
  if (win > std::min(h, w)) {
    throw ValidationError("ssim window " + std::to_string(win) + " exceeds image size " +
                          shape_to_string(a.shape()));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    total += ssim_plane(a.data().data() + k * h * w, b.data().data() + k * h * w, h, w, win, c1,
                        c2);
  }
  return total / static_cast<double>(c);
}

double psnr(const Tensor& a, const Tensor& b, double dynamic_range) {
  require_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse < 1e-12) return 99.0;
  return std::min(99.0, 10.0 * std::log10(dynamic_range * dynamic_range / mse));
}

double l1(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double l2(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l2");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

Featurizer parse_featurizer(const std::string& name) {
  if (name == "flatten") return Featurizer::flatten;
  if (name == "avgpool4") return Featurizer::avgpool4;
  throw ValidationError("unknown featurizer '" + name + "'");
}

Featurizer default_featurizer(const Shape& sample_shape) {
  return sample_shape.size() == 3 ? Featurizer::avgpool4 : Featurizer::flatten;
}

Eigen::VectorXd featurize(const Tensor& sample, Featurizer f) {
  if (f == Featurizer::flatten) {
    return Eigen::Map<const Eigen::VectorXd>(sample.data().data(),
                                             static_cast<Eigen::Index>(sample.size()));
  }
  if (sample.rank() != 3 || sample.dim(1) % 4 || sample.dim(2) % 4) {
    throw ValidationError("avgpool4 needs [c,h,w] with h, w divisible by 4, got " +
                          shape_to_string(sample.shape()));
  }
  const std::size_t c = sample.dim(0), h = sample.dim(1), w = sample.dim(2);
  const std::size_t bh = h / 4, bw = w / 4;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c * bh * bw));
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out[static_cast<Eigen::Index>((k * bh + y / 4) * bw + x / 4)] +=
            sample[(k * h + y) * w + x] / 16.0;
      }
    }
  }
  return out;
}

FeatureStats feature_stats(std::span<const Tensor> samples, Featurizer f) {
  if (samples.size() < 2) throw ContractError("feature statistics need at least 2 samples");
  std::vector<Eigen::VectorXd> feats;
  feats.reserve(samples.size());
  for (const Tensor& s : samples) feats.push_back(featurize(s, f));
  const auto d = feats.front().size();
  FeatureStats st;
  st.n = samples.size();
  st.mean = Eigen::VectorXd::Zero(d);
  for (const auto& v : feats) {
    if (v.size() != d) throw DimensionError("feature statistics: inconsistent sample shapes");
    st.mean += v;
  }
  st.mean /= static_cast<double>(st.n);
  st.cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& v : feats) {
    const Eigen::VectorXd c = v - st.mean;
    st.cov.noalias() += c * c.transpose();
  }
  st.cov /= static_cast<double>(st.n - 1);
  return st;
}

FeatureStats feature_stats(const Tensor& batch, Featurizer f) {
  const std::vector<Tensor> items = unstack(batch);
  return feature_stats(std::span<const Tensor>(items), f);
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd vals = eig.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals[i] < -1e-10) {
      throw NumericError(std::string(what) + " is not positive semidefinite (eigenvalue " +
                         std::to_string(vals[i]) + ")");
    }
    vals[i] = std::sqrt(std::max(vals[i], 0.0));
  }
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

void check_stats(const FeatureStats& s, const char* what) {
  if (s.cov.rows() != s.mean.size() || s.cov.cols() != s.mean.size()) {
    throw DimensionError(std::string(what) + ": covariance does not match mean dimension");
  }
  if ((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cov.cwiseAbs().maxCoeff())) {
    throw NumericError(std::string(what) + ": covariance is not symmetric");
  }
}

}  // namespace

double frechet_distance(const FeatureStats& p, const FeatureStats& q) {
  if (p.mean.size() != q.mean.size()) {
    throw DimensionError("frechet_distance: feature dimensions differ (" +
                         std::to_string(p.mean.size()) + " vs " + std::to_string(q.mean.size()) +
                         ")");
  }
  check_stats(p, "first statistics");
  check_stats(q, "second statistics");
  const Eigen::MatrixXd s1h = psd_sqrt(p.cov, "first covariance");
  Eigen::MatrixXd inner = s1h * q.cov * s1h;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()[i];
    if (v < -1e-10 * std::max(1.0, inner.cwiseAbs().maxCoeff())) {
      throw NumericError("frechet_distance: covariance product has a negative eigenvalue");
    }
    tr_sqrt += std::sqrt(std::max(v, 0.0));
  }
  const double d = (p.mean - q.mean).squaredNorm() + p.cov.trace() + q.cov.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

double toy_fid(const Tensor& batch_a, const Tensor& batch_b, Featurizer f) {
  return frechet_distance(feature_stats(batch_a, f), feature_stats(batch_b, f));
}

}  // namespace dmt
