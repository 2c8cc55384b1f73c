#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmt/data.hpp"
#include "dmt/schedule.hpp"
#include "dmt/tensor.hpp"

namespace dmt {

enum class CurveMetric { ssim, psnr, l1, l2 };

std::string to_string(CurveMetric m);
CurveMetric parse_curve_metric(const std::string& s);

/// Distance under a metric: 1 - SSIM, -PSNR (so larger means farther), or raw
/// L1 / L2.
double curve_distance(CurveMetric m, const Tensor& a, const Tensor& b);

struct DistanceCurve {
  CurveMetric metric = CurveMetric::ssim;
  std::vector<int> timesteps;
  std::vector<double> d_source;  // d(x0, x_t)
  std::vector<double> d_cross;   // d(x_t, y_t)
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Sample k (of n_samples) draws a pair index and a noise tensor from stream
/// CounterRng(seed).derive(k) and reuses them at every timestep, so curves
/// are smooth in t and independent of evaluation order.
DistanceCurve compute_curves(const Tensor& x0, const Tensor& y0, const NoiseSchedule& sched,
                             CurveMetric metric, std::span<const int> timesteps,
                             std::size_t n_samples, std::uint64_t seed);
DistanceCurve compute_curves(const PairedDataset& pairs, const NoiseSchedule& sched,
                             CurveMetric metric, std::span<const int> timesteps,
                             std::size_t n_samples, std::uint64_t seed);

/// First crossing of d_source over d_cross, located by linear interpolation
/// and rounded to the nearest sampled timestep. Throws SelectionError when
/// d_source does not start below d_cross and end above it.
int select_t_star(const DistanceCurve& curve);

/// Number of sign changes of d_source - d_cross along the sampled timesteps.
int count_crossings(const DistanceCurve& curve);

void write_curves_csv(const std::filesystem::path& path, const DistanceCurve& curve);
/// Reads a `t,d_source,d_cross` CSV.
DistanceCurve read_curves_csv(const std::filesystem::path& path);

/// |a-b| + |b-c| + |a-c| + lambda (a+b+c) with a = SSIM(x0, x_s),
/// b = SSIM(x_s, y_t), c = SSIM(y0, y_t), averaged over n_samples draws
/// (same stream layout as compute_curves).
double dist_st(const Tensor& x0, const Tensor& y0, const NoiseSchedule& sched, int s, int t,
               double lambda, std::size_t n_samples, std::uint64_t seed);

struct GridCell {
  int s;
  int t;
  double dist;
};

struct GridSearchResult {
  double lambda = 0.5;
  std::vector<GridCell> cells;  // s-major order
  int s_star = 0;
  int t_star = 0;
};

/// Evaluates dist_st over s_grid x t_grid; ties go to the smallest s, then t.
GridSearchResult grid_search_st(const Tensor& x0, const Tensor& y0, const NoiseSchedule& sched,
                                std::span<const int> s_grid, std::span<const int> t_grid,
                                double lambda, std::size_t n_samples, std::uint64_t seed);

void write_grid_csv(const std::filesystem::path& path, const GridSearchResult& grid);

struct TripletBound {
  double max;
  double mean;
  bool equality;
};

/// max(d1, d2, d3) >= (d1 + d2 + d3) / 3; `equality` when all pairwise
/// differences are below 1e-12.
TripletBound max_triplet_bound(double d1, double d2, double d3);

/// Evenly spaced timesteps 0, step, 2 step, ..., always ending at T.
std::vector<int> timestep_grid(int T, int step);

}  // namespace dmt
