#include <doctest.h>

#include <cmath>

#include "dmt/diffusion.hpp"
#include "dmt/errors.hpp"

using namespace dmt;

namespace {

Tensor randn(Shape s, std::uint64_t seed) {
  Tensor t(std::move(s));
  CounterRng r(seed);
  r.fill_normal(t.data());
  return t;
}

// Exact E[eps | y_t] for one-dimensional data N(mu, var): a perfect denoiser.
NoisePredictor gaussian_eps(const NoiseSchedule& s, double mu, double var) {
  return [&s, mu, var](const Tensor& y, int t) {
    const double ab = s.alpha_bar(t);
    const double gain = std::sqrt(1.0 - ab) / (ab * var + 1.0 - ab);
    Tensor e(y.shape());
    for (std::size_t k = 0; k < y.size(); ++k) e[k] = gain * (y[k] - std::sqrt(ab) * mu);
    return e;
  };
}

}  // namespace

TEST_CASE("diffuse edge cases") {
  const NoiseSchedule s = scaled_linear_schedule(50);
  const Tensor x0 = randn({3, 4}, 1);
  const Tensor z = randn({3, 4}, 2);
  CHECK(diffuse(x0, 0, z, s) == x0);
  const Tensor zero({3, 4});
  CHECK(max_abs_diff(diffuse(x0, 20, zero, s), std::sqrt(s.alpha_bar(20)) * x0) < 1e-15);
  CHECK_THROWS_AS(diffuse(x0, 51, z, s), IndexError);
  CHECK_THROWS_AS(diffuse(x0, 3, Tensor({4, 3}), s), DimensionError);
}

TEST_CASE("forward marginal moments") {
  const NoiseSchedule s = scaled_linear_schedule(100);
  const int n = 50000;
  const double x0 = 0.7;
  for (int t : {5, 50, 100}) {
    const Tensor z = randn({static_cast<std::size_t>(n)}, 100 + t);
    const Tensor xt = diffuse(Tensor(Shape{static_cast<std::size_t>(n)},
                                     std::vector<double>(n, x0)),
                              t, z, s);
    double m = 0.0, v = 0.0;
    for (double x : xt.data()) m += x;
    m /= n;
    for (double x : xt.data()) v += (x - m) * (x - m);
    v /= n - 1;
    const double var = 1.0 - s.alpha_bar(t);
    CHECK(std::abs(m - std::sqrt(s.alpha_bar(t)) * x0) < 3.0 * std::sqrt(var / n));
    CHECK(std::abs(v - var) < 3.0 * var * std::sqrt(2.0 / n));
  }
}

TEST_CASE("shared noise contracts the pair distance exactly") {
  const NoiseSchedule s = scaled_linear_schedule(200);
  const Tensor x0 = randn({8}, 3), y0 = randn({8}, 4), z = randn({8}, 5);
  for (int t : {0, 1, 50, 199, 200}) {
    const DiffusedPair p = diffuse_pair(x0, y0, t, z, s);
    CHECK(norm(p.x_t - p.y_t) ==
          doctest::Approx(std::sqrt(s.alpha_bar(t)) * norm(x0 - y0)).epsilon(1e-12));
    CHECK(p.shared_noise == z);
  }
  const DiffusedPair same = diffuse_pair(x0, x0, 77, z, s);
  CHECK(same.x_t == same.y_t);
}

TEST_CASE("asymmetric diffusion") {
  const NoiseSchedule s = scaled_linear_schedule(100);
  const Tensor x0 = randn({6}, 6), y0 = randn({6}, 7), z = randn({6}, 8);
  const AsymmetricPair eq = diffuse_pair_asym(x0, y0, 40, 40, z, s);
  const DiffusedPair sym = diffuse_pair(x0, y0, 40, z, s);
  CHECK(eq.x_s == sym.x_t);
  CHECK(eq.y_t == sym.y_t);
  CHECK(diffuse_pair_asym(x0, y0, 0, 40, z, s).x_s == x0);
}

TEST_CASE("asymmetric pairs have cross-covariance sqrt(1-ab_s) sqrt(1-ab_t)") {
  const NoiseSchedule s = scaled_linear_schedule(100);
  const std::size_t n = 50000;
  const Tensor z = randn({n}, 9);
  const Tensor zeros({n});
  const AsymmetricPair p = diffuse_pair_asym(zeros, zeros, 20, 70, z, s);
  double c = 0.0;
  for (std::size_t k = 0; k < n; ++k) c += p.x_s[k] * p.y_t[k];
  c /= static_cast<double>(n);
  const double expect = std::sqrt(1.0 - s.alpha_bar(20)) * std::sqrt(1.0 - s.alpha_bar(70));
  CHECK(std::abs(c - expect) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("ancestral step") {
  const NoiseSchedule s(3, 0.1, 0.3);
  const Tensor x0 = randn({5}, 10), z = randn({5}, 11);
  // One-step chain with the true noise recovers x0 exactly.
  const NoiseSchedule one(1, 0.2, 0.2);
  const Tensor x1 = diffuse(x0, 1, z, one);
  CHECK(max_abs_diff(ddpm_step(x1, 1, z, Tensor({5}), one), x0) < 1e-14);
  // Mean of the exact posterior q(x_{i-1} | x_i, x0) when eps is the true noise.
  const Tensor xi = diffuse(x0, 2, z, s);
  const double ab1 = s.alpha_bar(1), ab2 = s.alpha_bar(2), b2 = s.beta(2), a2 = s.alpha(2);
  const Tensor post = (std::sqrt(ab1) * b2 / (1 - ab2)) * x0 + (std::sqrt(a2) * (1 - ab1) / (1 - ab2)) * xi;
  CHECK(max_abs_diff(ddpm_step(xi, 2, z, Tensor({5}), s), post) < 1e-13);
  // Noise enters scaled by sigma_i.
  Tensor e = Tensor({5});
  e[2] = 1.0;
  const Tensor d = ddpm_step(xi, 3, z, e, s) - ddpm_step(xi, 3, z, Tensor({5}), s);
  CHECK(d[2] == doctest::Approx(posterior_sigma(s, 3)));
  CHECK(d[0] == 0.0);
  const Tensor db =
      ddpm_step(xi, 3, z, e, s, SigmaKind::beta) - ddpm_step(xi, 3, z, Tensor({5}), s, SigmaKind::beta);
  CHECK(db[2] == doctest::Approx(std::sqrt(s.beta(3))));
  CHECK_THROWS_AS(ddpm_step(xi, 1, z, e, s), ContractError);
  CHECK_THROWS_AS(ddpm_step(xi, 0, z, Tensor({5}), s), ContractError);
}

TEST_CASE("ddim step inverts the forward map for the true noise") {
  const NoiseSchedule s = scaled_linear_schedule(200);
  const Tensor x0 = randn({7}, 12), z = randn({7}, 13);
  const Tensor xt = diffuse(x0, 120, z, s);
  CHECK(max_abs_diff(ddim_step(xt, 120, 0, z, s), x0) < 1e-12);
  CHECK(max_abs_diff(ddim_step(xt, 120, 30, z, s), diffuse(x0, 30, z, s)) < 1e-12);
  CHECK_THROWS_AS(ddim_step(xt, 30, 30, z, s), ContractError);
  CHECK_THROWS_AS(ddim_step(xt, 201, 3, z, s), ContractError);
}

TEST_CASE("ddim visit lists") {
  CHECK(ddim_timesteps(200, 10) ==
        std::vector<int>{200, 180, 160, 140, 120, 100, 80, 60, 40, 20, 0});
  CHECK(ddim_timesteps(5, 10) == std::vector<int>{5, 4, 3, 2, 1, 0});
  CHECK(ddim_timesteps(0, 10) == std::vector<int>{0});
  CHECK(ddim_timesteps(7, 3) == std::vector<int>{7, 5, 2, 0});
  CHECK_THROWS_AS(ddim_timesteps(10, 0), ValidationError);
}

TEST_CASE("sampler spec parsing") {
  CHECK(SamplerSpec::parse("ancestral").kind == SamplerSpec::Kind::ancestral);
  const SamplerSpec d = SamplerSpec::parse("ddim:10");
  CHECK(d.kind == SamplerSpec::Kind::ddim);
  CHECK(d.steps == 10);
  CHECK(d.to_string() == "ddim:10");
  for (const char* bad : {"", "ddim", "ddim:", "ddim:0", "ddim:-2", "ddim:3x", "euler"}) {
    CHECK_THROWS_AS(SamplerSpec::parse(bad), ValidationError);
  }
}

TEST_CASE("function evaluation counts") {
  const NoiseSchedule s = scaled_linear_schedule(200);
  int calls = 0;
  NoisePredictor zero = [&calls](const Tensor& y, int) {
    ++calls;
    return Tensor(y.shape());
  };
  const Tensor y = randn({4}, 14);
  CHECK(sample_from(y, 200, zero, SamplerSpec::parse("ddim:10"), s, 0).nfe == 10);
  CHECK(calls == 10);
  CHECK(sample_from(y, 37, zero, SamplerSpec{}, s, 0).nfe == 37);
  const SampleResult none = sample_from(y, 0, zero, SamplerSpec{}, s, 0);
  CHECK(none.nfe == 0);
  CHECK(none.y == y);
  CHECK_THROWS_AS(sample_from(y, 201, zero, SamplerSpec{}, s, 0), IndexError);
}

TEST_CASE("a perfect denoiser for a single point returns that point") {
  const NoiseSchedule s = scaled_linear_schedule(200);
  const Tensor point = Tensor::vector({0.3, -0.8, 0.5});
  NoisePredictor eps = [&](const Tensor& y, int t) {
    const auto c = marginal_coeffs(s, t);
    return (1.0 / c.sqrt_one_minus_ab) * (y - c.sqrt_ab * point);
  };
  const Tensor start = randn({3}, 15);
  for (const char* spec : {"ancestral", "ddim:10", "ddim:200"}) {
    const SampleResult r = sample_from(start, 200, eps, SamplerSpec::parse(spec), s, 4);
    CHECK(max_abs_diff(r.y, point) < 1e-6);
  }
}

TEST_CASE("ancestral and full-length ddim agree in moments on Gaussian data") {
  const NoiseSchedule s = scaled_linear_schedule(100);
  const double mu = 0.3, var = 0.25;
  const NoisePredictor eps = gaussian_eps(s, mu, var);
  const std::size_t n = 20000;
  const Tensor start = randn({n, 1}, 16);
  const Tensor a = sample_from(start, 100, eps, SamplerSpec{}, s, 17).y;
  const Tensor d = sample_from(start, 100, eps, SamplerSpec::parse("ddim:100"), s, 17).y;
  auto moments = [](const Tensor& t) {
    double m = 0.0, v = 0.0;
    for (double x : t.data()) m += x;
    m /= static_cast<double>(t.size());
    for (double x : t.data()) v += (x - m) * (x - m);
    return std::pair{m, v / static_cast<double>(t.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [md, vd] = moments(d);
  const double se = std::sqrt(var / n);
  CHECK(std::abs(ma - mu) < 4.0 * se);
  CHECK(std::abs(md - mu) < 4.0 * se);
  CHECK(std::abs(ma - md) < 6.0 * se);
  CHECK(va == doctest::Approx(var).epsilon(0.05));
  CHECK(vd == doctest::Approx(var).epsilon(0.05));
}

TEST_CASE("row streams make batched sampling equal per-row sampling") {
  const NoiseSchedule s = scaled_linear_schedule(50);
  const NoisePredictor eps = gaussian_eps(s, 0.0, 0.5);
  const Tensor batch = randn({3, 2}, 18);
  std::vector<CounterRng> streams{CounterRng(1), CounterRng(2), CounterRng(3)};
  const Tensor joint = sample_from(batch, 30, eps, SamplerSpec{}, s, streams).y;
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<CounterRng> one{CounterRng(r + 1)};
    const Tensor single =
        sample_from(batch.slice_leading(r, 1), 30, eps, SamplerSpec{}, s, one).y;
    CHECK(joint.slice_leading(r, 1) == single);
  }
  std::vector<CounterRng> wrong{CounterRng(1), CounterRng(2)};
  CHECK_THROWS_AS(sample_from(batch, 30, eps, SamplerSpec{}, s, wrong), DimensionError);
}
