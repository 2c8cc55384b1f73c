#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "dmt/data.hpp"
#include "dmt/errors.hpp"
#include "dmt/metrics.hpp"
#include "dmt/rng.hpp"
#include "dmt/timestep_select.hpp"
#include "tmpdir.hpp"

using namespace dmt;

namespace {

DistanceCurve synthetic(int T, int step, double (*src)(double), double (*cross)(double)) {
  DistanceCurve c;
  c.metric = CurveMetric::l2;
  c.timesteps = timestep_grid(T, step);
  for (int t : c.timesteps) {
    const double u = static_cast<double>(t) / T;
    c.d_source.push_back(src(u));
    c.d_cross.push_back(cross(u));
  }
  return c;
}

double rising(double u) { return u; }
double falling(double u) { return 1.0 - u; }

/// Two independent [n, 8] batches uniform in [-0.8, 0.8].
std::pair<Tensor, Tensor> random_rows(std::size_t n, std::uint64_t seed) {
  CounterRng r(seed);
  Tensor x({n, 8}), y({n, 8});
  for (double& v : x.data()) v = 0.8 * (2.0 * r.uniform() - 1.0);
  for (double& v : y.data()) v = 0.8 * (2.0 * r.uniform() - 1.0);
  return {x, y};
}

}  // namespace

TEST_CASE("metric names round trip and unknown names are rejected") {
  for (CurveMetric m : {CurveMetric::ssim, CurveMetric::psnr, CurveMetric::l1, CurveMetric::l2}) {
    CHECK(parse_curve_metric(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_curve_metric("SSIM"), ValidationError);
  CHECK_THROWS_AS(parse_curve_metric("fid"), ValidationError);
}

TEST_CASE("curve_distance conventions") {
  const Tensor a = Tensor::vector({0.1, 0.2, -0.3, 0.5, 0.0, 0.4});
  const Tensor b = Tensor::vector({0.2, 0.1, -0.1, 0.4, 0.3, 0.4});
  CHECK(curve_distance(CurveMetric::ssim, a, b) == doctest::Approx(1.0 - ssim(a, b)));
  CHECK(curve_distance(CurveMetric::psnr, a, b) == doctest::Approx(-psnr(a, b)));
  CHECK(curve_distance(CurveMetric::l1, a, b) == doctest::Approx(l1(a, b)));
  CHECK(curve_distance(CurveMetric::l2, a, b) == doctest::Approx(l2(a, b)));
  CHECK(curve_distance(CurveMetric::ssim, a, a) == doctest::Approx(0.0));
}

TEST_CASE("symmetric synthetic curves cross at T/2") {
  CHECK(select_t_star(synthetic(100, 10, rising, falling)) == 50);
  CHECK(select_t_star(synthetic(200, 1, rising, falling)) == 100);
  CHECK(count_crossings(synthetic(100, 10, rising, falling)) == 1);
}

TEST_CASE("crossing rounds to the nearest sampled timestep") {
  DistanceCurve c;
  c.timesteps = {0, 10, 20};
  c.d_source = {0.0, 0.2, 0.6};
  c.d_cross = {1.0, 0.5, 0.4};  // gap -0.3 at 10, +0.2 at 20: crossing at 16
  CHECK(select_t_star(c) == 20);
  c.d_source[2] = 0.9;  // gap +0.5: crossing at 13.75
  CHECK(select_t_star(c) == 10);
}

TEST_CASE("first crossing wins when curves cross several times") {
  DistanceCurve c;
  c.timesteps = {0, 1, 2, 3, 4};
  c.d_source = {0.0, 1.5, 0.0, 2.0, 2.0};
  c.d_cross = {1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK(select_t_star(c) == 1);
  CHECK(count_crossings(c) == 3);
}

TEST_CASE("t* unchanged when the metric is doubled") {
  DistanceCurve c = synthetic(60, 3, [](double u) { return u * u; },
                              [](double u) { return 0.7 - 0.5 * u; });
  const int t = select_t_star(c);
  for (double& v : c.d_source) v *= 2.0;
  for (double& v : c.d_cross) v *= 2.0;
  CHECK(select_t_star(c) == t);
}

TEST_CASE("missing crossings raise SelectionError") {
  // Starts above.
  CHECK_THROWS_AS(select_t_star(synthetic(10, 1, falling, rising)), SelectionError);
  // Never rises above.
  CHECK_THROWS_AS(select_t_star(synthetic(10, 1, rising, [](double) { return 2.0; })),
                  SelectionError);
  // Equal at t=0 is not "below".
  CHECK_THROWS_AS(select_t_star(synthetic(10, 1, rising, [](double u) { return 0.0 * u; })),
                  SelectionError);
  try {
    select_t_star(synthetic(10, 1, falling, rising));
  } catch (const SelectionError& e) {
    CHECK(std::string(e.what()).find("widen") != std::string::npos);
  }
  DistanceCurve bad;
  CHECK_THROWS_AS(select_t_star(bad), ContractError);
  bad.timesteps = {0, 1};
  bad.d_source = {0.0};
  bad.d_cross = {1.0, 0.0};
  CHECK_THROWS_AS(select_t_star(bad), ContractError);
}

TEST_CASE("count_crossings skips exact ties") {
  DistanceCurve c;
  c.timesteps = {0, 1, 2, 3};
  c.d_source = {0.0, 1.0, 2.0, 3.0};
  c.d_cross = {1.0, 1.0, 1.0, 1.0};
  CHECK(count_crossings(c) == 1);
  c.d_source = {0.0, 1.0, 0.0, 0.5};
  CHECK(count_crossings(c) == 0);
}

TEST_CASE("curve at t=0 gives zero source distance and the clean-pair distance") {
  const auto [x, y] = random_rows(1, 3);
  const NoiseSchedule s = scaled_linear_schedule(100);
  const std::vector<int> ts{0};
  for (CurveMetric m : {CurveMetric::l1, CurveMetric::l2, CurveMetric::ssim}) {
    const DistanceCurve c = compute_curves(x, y, s, m, ts, 7, 1);
    CHECK(c.d_source[0] == doctest::Approx(0.0));
    CHECK(c.d_cross[0] == doctest::Approx(curve_distance(m, x.reshaped({8}), y.reshaped({8}))));
    CHECK(c.n_samples == 7);
    CHECK(c.seed == 1);
  }
}

TEST_CASE("L2 cross distance is the clean distance scaled by sqrt(alpha_bar)") {
  const auto [x, y] = random_rows(1, 5);
  const NoiseSchedule s = scaled_linear_schedule(100);
  const std::vector<int> ts = timestep_grid(100, 7);
  const DistanceCurve c = compute_curves(x, y, s, CurveMetric::l2, ts, 16, 9);
  const double clean = l2(x, y);
  for (std::size_t j = 0; j < ts.size(); ++j) {
    CHECK(c.d_cross[j] == doctest::Approx(std::sqrt(s.alpha_bar(ts[j])) * clean).epsilon(1e-12));
  }
}

TEST_CASE("compute_curves input contracts") {
  const auto [x, y] = random_rows(3, 5);
  const NoiseSchedule s = scaled_linear_schedule(50);
  const std::vector<int> ok{0, 10, 50};
  CHECK_THROWS_AS(compute_curves(x, y, s, CurveMetric::l2, std::vector<int>{0, 10, 10}, 2, 0),
                  ValidationError);
  CHECK_THROWS_AS(compute_curves(x, y, s, CurveMetric::l2, std::vector<int>{20, 10}, 2, 0),
                  ValidationError);
  CHECK_THROWS_AS(compute_curves(x, y, s, CurveMetric::l2, std::vector<int>{0, 51}, 2, 0),
                  IndexError);
  CHECK_THROWS_AS(compute_curves(x, y, s, CurveMetric::l2, std::vector<int>{-1, 5}, 2, 0),
                  IndexError);
  CHECK_THROWS_AS(compute_curves(x, y, s, CurveMetric::l2, std::vector<int>{}, 2, 0),
                  ValidationError);
  CHECK_THROWS_AS(compute_curves(x, y, s, CurveMetric::l2, ok, 0, 0), ValidationError);
  CHECK_THROWS_AS(compute_curves(Tensor({0, 8}), Tensor({0, 8}), s, CurveMetric::l2, ok, 2, 0),
                  ContractError);
  CHECK_THROWS_AS(compute_curves(x, Tensor({3, 7}), s, CurveMetric::l2, ok, 2, 0),
                  DimensionError);
}

TEST_CASE("curves are deterministic and independent of the timestep subset") {
  const auto [x, y] = random_rows(10, 11);
  const NoiseSchedule s = scaled_linear_schedule(50);
  const std::vector<int> all = timestep_grid(50, 5), some{10, 25};
  const DistanceCurve a = compute_curves(x, y, s, CurveMetric::l1, all, 12, 4);
  const DistanceCurve b = compute_curves(x, y, s, CurveMetric::l1, all, 12, 4);
  const DistanceCurve c = compute_curves(x, y, s, CurveMetric::l1, some, 12, 4);
  CHECK(a.d_source == b.d_source);
  CHECK(a.d_cross == b.d_cross);
  CHECK(c.d_source[0] == a.d_source[2]);
  CHECK(c.d_cross[1] == a.d_cross[5]);
  const DistanceCurve other = compute_curves(x, y, s, CurveMetric::l1, all, 12, 5);
  CHECK(other.d_source != a.d_source);
}

TEST_CASE("toy shapes curves are monotone with a single stable crossing") {
  const PairedDataset ds = gen_shapes_pair(64, 16, 0);
  const NoiseSchedule s = scaled_linear_schedule(200);
  const std::vector<int> ts = timestep_grid(200, 5);
  std::vector<int> picks;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DistanceCurve c = compute_curves(ds, s, CurveMetric::ssim, ts, 48, seed);
    const auto [smin, smax] = std::minmax_element(c.d_source.begin(), c.d_source.end());
    const auto [cmin, cmax] = std::minmax_element(c.d_cross.begin(), c.d_cross.end());
    const double tol_s = 0.02 * (*smax - *smin), tol_c = 0.02 * (*cmax - *cmin);
    for (std::size_t j = 1; j < ts.size(); ++j) {
      CHECK(c.d_source[j] >= c.d_source[j - 1] - tol_s);
      CHECK(c.d_cross[j] <= c.d_cross[j - 1] + tol_c);
    }
    CHECK(count_crossings(c) == 1);
    picks.push_back(select_t_star(c));
  }
  const auto [lo, hi] = std::minmax_element(picks.begin(), picks.end());
  MESSAGE("t* across seeds: ", *lo, "..", *hi);
  CHECK(*hi - *lo <= 2 * std::max(2, 200 / 10));
}

TEST_CASE("curve CSV round trip") {
  const auto dir = testing::fresh_dir("csv");
  DistanceCurve c = synthetic(20, 3, rising, falling);
  c.d_source[1] = 0.1 + 1e-15;
  write_curves_csv(dir / "c.csv", c);
  const DistanceCurve back = read_curves_csv(dir / "c.csv");
  CHECK(back.timesteps == c.timesteps);
  CHECK(back.d_source == c.d_source);
  CHECK(back.d_cross == c.d_cross);
}

TEST_CASE("malformed curve CSV reports offsets") {
  const auto dir = testing::fresh_dir("badcsv");
  auto write = [&](const std::string& text) {
    std::ofstream(dir / "c.csv", std::ios::binary) << text;
    return dir / "c.csv";
  };
  try {
    read_curves_csv(write("step,a,b\n0,1,2\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }
  const std::string header = "t,d_source,d_cross\n";
  const std::string good = "0,0.5,0.7\n";
  try {
    read_curves_csv(write(header + good + "5,0.5\n"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == header.size() + good.size());
  }
  CHECK_THROWS_AS(read_curves_csv(write(header + "1,2,3,4\n")), ParseError);
  CHECK_THROWS_AS(read_curves_csv(write("")), ParseError);
  CHECK_THROWS_AS(read_curves_csv(dir / "missing.csv"), ValidationError);
  CHECK(read_curves_csv(write(header + good + "\n")).timesteps.size() == 1);
}

TEST_CASE("dist_st plug-in values") {
  const auto [x, unused] = random_rows(1, 2);
  const NoiseSchedule s = scaled_linear_schedule(50);
  // Identical pair at s=t=0: all three SSIMs are 1.
  CHECK(dist_st(x, x, s, 0, 0, 0.5, 3, 1) == doctest::Approx(1.5));
  CHECK(dist_st(x, x, s, 0, 0, 2.0, 3, 1) == doctest::Approx(6.0));
  CHECK(dist_st(x, x, s, 0, 0, 0.0, 3, 1) == doctest::Approx(0.0));
}

TEST_CASE("dist_st matches a hand-written oracle") {
  const auto [x, y] = random_rows(4, 21);
  const NoiseSchedule s = scaled_linear_schedule(50);
  const double lambda = 0.5;
  const int ss = 10, tt = 30;
  const std::size_t n = 6;
  double total = 0.0;
  const CounterRng root(17);
  for (std::size_t k = 0; k < n; ++k) {
    CounterRng rng = root.derive(k);
    const std::size_t i = rng.below(4);
    Tensor z({8});
    rng.fill_normal(z.data());
    const Tensor xi = x.slice_leading(i, 1).reshaped({8});
    const Tensor yi = y.slice_leading(i, 1).reshaped({8});
    Tensor xs({8}), yt({8});
    const double as = std::sqrt(s.alpha_bar(ss)), bs = std::sqrt(1.0 - s.alpha_bar(ss));
    const double at = std::sqrt(s.alpha_bar(tt)), bt = std::sqrt(1.0 - s.alpha_bar(tt));
    for (std::size_t d = 0; d < 8; ++d) {
      xs[d] = as * xi[d] + bs * z[d];
      yt[d] = at * yi[d] + bt * z[d];
    }
    const double a = ssim(xi, xs), b = ssim(xs, yt), c = ssim(yi, yt);
    total += std::abs(a - b) + std::abs(b - c) + std::abs(a - c) + lambda * (a + b + c);
  }
  CHECK(dist_st(x, y, s, ss, tt, lambda, n, 17) == doctest::Approx(total / n).epsilon(1e-12));
}

TEST_CASE("dist_st contracts") {
  const auto [x, y] = random_rows(2, 2);
  const NoiseSchedule s = scaled_linear_schedule(50);
  CHECK_THROWS_AS(dist_st(x, y, s, 0, 0, -0.1, 2, 0), ValidationError);
  CHECK_THROWS_AS(dist_st(x, y, s, 0, 0, std::nan(""), 2, 0), ValidationError);
  CHECK_THROWS_AS(dist_st(x, y, s, 0, 0, 0.5, 0, 0), ValidationError);
  CHECK_THROWS_AS(dist_st(x, y, s, 51, 0, 0.5, 2, 0), IndexError);
  CHECK_THROWS_AS(dist_st(x, y, s, 0, -1, 0.5, 2, 0), IndexError);
}

TEST_CASE("grid search on a 1x1 grid returns that pair") {
  const auto [x, y] = random_rows(5, 8);
  const NoiseSchedule s = scaled_linear_schedule(50);
  const std::vector<int> sg{20}, tg{30};
  const GridSearchResult r = grid_search_st(x, y, s, sg, tg, 0.5, 4, 3);
  CHECK(r.s_star == 20);
  CHECK(r.t_star == 30);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].dist == doctest::Approx(dist_st(x, y, s, 20, 30, 0.5, 4, 3)).epsilon(1e-12));
  CHECK(r.lambda == 0.5);
}

TEST_CASE("grid cells are independent of grid order") {
  const auto [x, y] = random_rows(6, 9);
  const NoiseSchedule s = scaled_linear_schedule(50);
  std::vector<int> sg{0, 10, 25, 40}, tg{5, 20, 50};
  const GridSearchResult a = grid_search_st(x, y, s, sg, tg, 0.5, 8, 4);
  std::reverse(sg.begin(), sg.end());
  std::swap(tg[0], tg[2]);
  const GridSearchResult b = grid_search_st(x, y, s, sg, tg, 0.5, 8, 4);
  CHECK(a.s_star == b.s_star);
  CHECK(a.t_star == b.t_star);
  for (const GridCell& ca : a.cells) {
    const auto it = std::find_if(b.cells.begin(), b.cells.end(),
                                 [&](const GridCell& cb) { return cb.s == ca.s && cb.t == ca.t; });
    REQUIRE(it != b.cells.end());
    CHECK(it->dist == ca.dist);
  }
  // s-major layout.
  CHECK(a.cells[1].s == 0);
  CHECK(a.cells[1].t == 20);
  CHECK(a.cells[3].s == 10);
}

TEST_CASE("grid ties go to the smallest s, then the smallest t") {
  const auto [x, unused] = random_rows(1, 4);
  const NoiseSchedule s = scaled_linear_schedule(50);
  // Repeated grid entries give exactly tied cells.
  const std::vector<int> sg{30, 0, 0}, tg{30, 0, 0};
  const GridSearchResult r = grid_search_st(x, x, s, sg, tg, 0.0, 3, 0);
  CHECK(r.s_star == 0);
  CHECK(r.t_star == 0);
  const GridCell* best = nullptr;
  for (const GridCell& c : r.cells) {
    if (!best || c.dist < best->dist) best = &c;
  }
  CHECK(best->dist == 0.0);
}

TEST_CASE("grid search contracts") {
  const auto [x, y] = random_rows(2, 2);
  const NoiseSchedule s = scaled_linear_schedule(50);
  const std::vector<int> g{0, 10}, empty;
  CHECK_THROWS_AS(grid_search_st(x, y, s, empty, g, 0.5, 2, 0), ValidationError);
  CHECK_THROWS_AS(grid_search_st(x, y, s, g, empty, 0.5, 2, 0), ValidationError);
  CHECK_THROWS_AS(grid_search_st(x, y, s, g, g, -1.0, 2, 0), ValidationError);
  CHECK_THROWS_AS(grid_search_st(x, y, s, g, std::vector<int>{60}, 0.5, 2, 0), IndexError);
}

TEST_CASE("grid CSV lists every cell") {
  const auto dir = testing::fresh_dir("grid");
  GridSearchResult r;
  r.cells = {{0, 0, 1.5}, {0, 10, 0.25}};
  write_grid_csv(dir / "g.csv", r);
  std::ifstream in(dir / "g.csv");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text == "s,t,dist\n0,0,1.5\n0,10,0.25\n");
}

TEST_CASE("max_triplet_bound cases") {
  const TripletBound eq = max_triplet_bound(1, 1, 1);
  CHECK(eq.max == 1.0);
  CHECK(eq.mean == 1.0);
  CHECK(eq.equality);
  const TripletBound b = max_triplet_bound(3, 1, 1);
  CHECK(b.max == 3.0);
  CHECK(b.mean == doctest::Approx(5.0 / 3.0));
  CHECK_FALSE(b.equality);
  CHECK(max_triplet_bound(1.0, 1.0 + 1e-13, 1.0).equality);
  CHECK_FALSE(max_triplet_bound(1.0, 1.0 + 1e-9, 1.0).equality);
}

TEST_CASE("max is never below the mean for random triples") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(gen), b = u(gen), c = u(gen);
    const TripletBound r = max_triplet_bound(a, b, c);
    CHECK(r.max >= r.mean);
    CHECK(r.equality == (a == b && b == c));
  }
}

TEST_CASE("timestep_grid") {
  CHECK(timestep_grid(10, 5) == std::vector<int>{0, 5, 10});
  CHECK(timestep_grid(10, 3) == std::vector<int>{0, 3, 6, 9, 10});
  CHECK(timestep_grid(0, 4) == std::vector<int>{0});
  CHECK(timestep_grid(3, 10) == std::vector<int>{0, 3});
  CHECK_THROWS_AS(timestep_grid(-1, 1), ValidationError);
  CHECK_THROWS_AS(timestep_grid(10, 0), ValidationError);
}
