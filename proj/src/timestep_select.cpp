#include "dmt/timestep_select.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dmt/binary_io.hpp"
#include "dmt/diffusion.hpp"
#include "dmt/errors.hpp"
#include "dmt/metrics.hpp"
#include "dmt/parallel.hpp"
#include "dmt/rng.hpp"

namespace dmt {

std::string to_string(CurveMetric m) {
  switch (m) {
    case CurveMetric::ssim: return "ssim";
    case CurveMetric::psnr: return "psnr";
    case CurveMetric::l1: return "l1";
    case CurveMetric::l2: return "l2";
  }
  return "?";
}

CurveMetric parse_curve_metric(const std::string& s) {
  if (s == "ssim") return CurveMetric::ssim;
  if (s == "psnr") return CurveMetric::psnr;
  if (s == "l1") return CurveMetric::l1;
  if (s == "l2") return CurveMetric::l2;
  throw ValidationError("metric must be one of ssim, psnr, l1, l2; got '" + s + "'");
}

double curve_distance(CurveMetric m, const Tensor& a, const Tensor& b) {
  switch (m) {
    case CurveMetric::ssim: return 1.0 - ssim(a, b);
    case CurveMetric::psnr: return -psnr(a, b);
    case CurveMetric::l1: return l1(a, b);
    case CurveMetric::l2: return l2(a, b);
  }
  return 0.0;
}

namespace {

struct Draw {
  Tensor x0;
  Tensor y0;
  Tensor z;
};

Draw draw_sample(const Tensor& x0, const Tensor& y0, const CounterRng& root, std::size_t k) {
  CounterRng rng = root.derive(k);
  const std::size_t i = rng.below(x0.dim(0));
  const Shape sample(x0.shape().begin() + 1, x0.shape().end());
  Draw d{x0.slice_leading(i, 1).reshaped(sample), y0.slice_leading(i, 1).reshaped(sample),
         Tensor(sample)};
  rng.fill_normal(d.z.data());
  return d;
}

void check_inputs(const Tensor& x0, const Tensor& y0, std::size_t n_samples) {
  require_same_shape(x0, y0, "paired samples");
  if (x0.rank() < 2 || x0.dim(0) == 0) throw ContractError("timestep selection needs data");
  if (n_samples < 1) throw ValidationError("n_samples must be >= 1");
}

}  // namespace

DistanceCurve compute_curves(const Tensor& x0, const Tensor& y0, const NoiseSchedule& sched,
                             CurveMetric metric, std::span<const int> timesteps,
                             std::size_t n_samples, std::uint64_t seed) {
  check_inputs(x0, y0, n_samples);
  if (timesteps.empty()) throw ValidationError("curve needs at least one timestep");
  for (std::size_t j = 0; j < timesteps.size(); ++j) {
    if (timesteps[j] < 0 || timesteps[j] > sched.T()) {
      throw IndexError("curve timestep " + std::to_string(timesteps[j]) + " outside [0, " +
                       std::to_string(sched.T()) + "]");
    }
    if (j > 0 && timesteps[j] <= timesteps[j - 1]) {
      throw ValidationError("curve timesteps must be strictly ascending");
    }
  }
  const std::size_t m = timesteps.size();
  std::vector<double> src(n_samples * m), cross(n_samples * m);
  const CounterRng root(seed);
  parallel_for(n_samples, [&](std::size_t k) {
    const Draw d = draw_sample(x0, y0, root, k);
    for (std::size_t j = 0; j < m; ++j) {
      const DiffusedPair p = diffuse_pair(d.x0, d.y0, timesteps[j], d.z, sched);
      src[k * m + j] = curve_distance(metric, d.x0, p.x_t);
      cross[k * m + j] = curve_distance(metric, p.x_t, p.y_t);
    }
  });
  DistanceCurve c{metric, std::vector<int>(timesteps.begin(), timesteps.end()),
                  std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), n_samples, seed};
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      c.d_source[j] += src[k * m + j];
      c.d_cross[j] += cross[k * m + j];
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    c.d_source[j] /= static_cast<double>(n_samples);
    c.d_cross[j] /= static_cast<double>(n_samples);
  }
  return c;
}

DistanceCurve compute_curves(const PairedDataset& pairs, const NoiseSchedule& sched,
                             CurveMetric metric, std::span<const int> timesteps,
                             std::size_t n_samples, std::uint64_t seed) {
  return compute_curves(pairs.train_x0(), pairs.train_y0(), sched, metric, timesteps, n_samples,
                        seed);
}

int select_t_star(const DistanceCurve& c) {
  const std::size_t m = c.timesteps.size();
  if (m == 0 || c.d_source.size() != m || c.d_cross.size() != m) {
    throw ContractError("distance curve arrays are empty or of unequal length");
  }
  auto gap = [&](std::size_t j) { return c.d_source[j] - c.d_cross[j]; };
  const char* hint = "; widen the timestep range or choose another metric";
  if (!(gap(0) < 0.0)) {
    throw SelectionError(std::string("no crossing: d_source does not start below d_cross") + hint);
  }
  for (std::size_t j = 1; j < m; ++j) {
    if (gap(j) >= 0.0) {
      const double t0 = c.timesteps[j - 1], t1 = c.timesteps[j];
      const double t_cross = t0 + (t1 - t0) * (-gap(j - 1)) / (gap(j) - gap(j - 1));
      return std::abs(t_cross - t0) <= std::abs(t1 - t_cross) ? c.timesteps[j - 1]
                                                               : c.timesteps[j];
    }
  }
  throw SelectionError(std::string("no crossing: d_source stays below d_cross") + hint);
}

int count_crossings(const DistanceCurve& c) {
  int count = 0;
  int prev = 0;
  for (std::size_t j = 0; j < c.timesteps.size(); ++j) {
    const double g = c.d_source[j] - c.d_cross[j];
    const int sign = g > 0.0 ? 1 : (g < 0.0 ? -1 : 0);
    if (sign == 0) continue;
    if (prev != 0 && sign != prev) ++count;
    prev = sign;
  }
  return count;
}

void write_curves_csv(const std::filesystem::path& path, const DistanceCurve& c) {
  std::string out = "t,d_source,d_cross\n";
  char buf[96];
  for (std::size_t j = 0; j < c.timesteps.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", c.timesteps[j], c.d_source[j],
                  c.d_cross[j]);
    out += buf;
  }
  io::write_file(path, out);
}

DistanceCurve read_curves_csv(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line.rfind("t,d_source,d_cross", 0) != 0) {
    throw ParseError("curve CSV must start with the header t,d_source,d_cross", 0);
  }
  offset += line.size() + 1;
  DistanceCurve c;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      offset += 1;
      continue;
    }
    int t = 0;
    double a = 0.0, b = 0.0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf%c", &t, &a, &b, &tail) != 3) {
      throw ParseError("malformed curve row '" + line + "'", offset);
    }
    c.timesteps.push_back(t);
    c.d_source.push_back(a);
    c.d_cross.push_back(b);
    offset += line.size() + 1;
  }
  return c;
}

namespace {

double dist_for_draw(const Draw& d, const NoiseSchedule& sched, int s, int t, double lambda) {
  const AsymmetricPair p = diffuse_pair_asym(d.x0, d.y0, s, t, d.z, sched);
  const double a = ssim(d.x0, p.x_s);
  const double b = ssim(p.x_s, p.y_t);
  const double c = ssim(d.y0, p.y_t);
  return std::abs(a - b) + std::abs(b - c) + std::abs(a - c) + lambda * (a + b + c);
}

}  // namespace

double dist_st(const Tensor& x0, const Tensor& y0, const NoiseSchedule& sched, int s, int t,
               double lambda, std::size_t n_samples, std::uint64_t seed) {
  check_inputs(x0, y0, n_samples);
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  const CounterRng root(seed);
  double total = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    total += dist_for_draw(draw_sample(x0, y0, root, k), sched, s, t, lambda);
  }
  return total / static_cast<double>(n_samples);
}

GridSearchResult grid_search_st(const Tensor& x0, const Tensor& y0, const NoiseSchedule& sched,
                                std::span<const int> s_grid, std::span<const int> t_grid,
                                double lambda, std::size_t n_samples, std::uint64_t seed) {
  check_inputs(x0, y0, n_samples);
  if (s_grid.empty() || t_grid.empty()) throw ValidationError("grid search needs non-empty grids");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  for (int v : s_grid) marginal_coeffs(sched, v);
  for (int v : t_grid) marginal_coeffs(sched, v);
  const std::size_t ns = s_grid.size(), nt = t_grid.size();
  // Per-sample rows so that every cell sees the same draws (common random numbers).
  std::vector<double> values(n_samples * ns * nt);
  const CounterRng root(seed);
  parallel_for(n_samples, [&](std::size_t k) {
    const Draw d = draw_sample(x0, y0, root, k);
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nt; ++j) {
        values[(k * ns + i) * nt + j] = dist_for_draw(d, sched, s_grid[i], t_grid[j], lambda);
      }
    }
  });
  GridSearchResult r;
  r.lambda = lambda;
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      double total = 0.0;
      for (std::size_t k = 0; k < n_samples; ++k) total += values[(k * ns + i) * nt + j];
      r.cells.push_back({s_grid[i], t_grid[j], total / static_cast<double>(n_samples)});
    }
  }
  const GridCell* best = nullptr;
  for (const GridCell& c : r.cells) {
    if (!best || c.dist < best->dist ||
        (c.dist == best->dist && (c.s < best->s || (c.s == best->s && c.t < best->t)))) {
      best = &c;
    }
  }
  r.s_star = best->s;
  r.t_star = best->t;
  return r;
}

void write_grid_csv(const std::filesystem::path& path, const GridSearchResult& grid) {
  std::string out = "s,t,dist\n";
  char buf[96];
  for (const GridCell& c : grid.cells) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", c.s, c.t, c.dist);
    out += buf;
  }
  io::write_file(path, out);
}

TripletBound max_triplet_bound(double d1, double d2, double d3) {
  const double mx = std::max({d1, d2, d3});
  const double mean = (d1 + d2 + d3) / 3.0;
  const bool eq =
      std::abs(d1 - d2) < 1e-12 && std::abs(d2 - d3) < 1e-12 && std::abs(d1 - d3) < 1e-12;
  return {mx, mean, eq};
}

std::vector<int> timestep_grid(int T, int step) {
  if (T < 0 || step < 1) throw ValidationError("timestep grid needs T >= 0 and step >= 1");
  std::vector<int> out;
  for (int t = 0; t < T; t += step) out.push_back(t);
  out.push_back(T);
  return out;
}

}  // namespace dmt
