// Acceptance run: every criterion at its tolerance and runtime limit.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmt/binary_io.hpp"
#include "dmt/checkpoint.hpp"
#include "dmt/cli.hpp"
#include "dmt/data.hpp"
#include "dmt/diffusion.hpp"
#include "dmt/dmt.hpp"
#include "dmt/errors.hpp"
#include "dmt/experiment_config.hpp"
#include "dmt/metrics.hpp"
#include "dmt/theory.hpp"
#include "dmt/timestep_select.hpp"
#include "gradcheck.hpp"

using namespace dmt;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kWork = DMT_TEST_TMP;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor row(const Tensor& batch, std::size_t i) {
  const Shape sample(batch.shape().begin() + 1, batch.shape().end());
  return batch.slice_leading(i, 1).reshaped(sample);
}

/// Mean over rows of the per-sample RMS difference.
double mean_l2(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(0); ++i) s += l2(row(a, i), row(b, i));
  return s / static_cast<double>(a.dim(0));
}

/// Runs a CLI command in-process with its console output appended to log.txt.
int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dmt");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ofstream log(kWork / "log.txt", std::ios::app);
  auto* old_out = std::cout.rdbuf(log.rdbuf());
  auto* old_err = std::cerr.rdbuf(log.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return code;
}

// ---- 1 ---------------------------------------------------------------------

Outcome shared_noise_contraction() {
  const NoiseSchedule sched = linear_schedule(1000, 1e-4, 0.02);
  CounterRng rng(1);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    Tensor x0({16}), y0({16}), z({16});
    for (double& v : x0.data()) v = rng.uniform(-1.0, 1.0);
    for (double& v : y0.data()) v = rng.uniform(-1.0, 1.0);
    for (double& v : z.data()) v = rng.normal();
    Tensor diff0 = x0;
    for (std::size_t i = 0; i < diff0.size(); ++i) diff0[i] -= y0[i];
    const double d0 = norm(diff0);
    for (int t = 0; t <= sched.T(); ++t) {
      const DiffusedPair p = diffuse_pair(x0, y0, t, z, sched);
      Tensor dt = p.x_t;
      for (std::size_t i = 0; i < dt.size(); ++i) dt[i] -= p.y_t[i];
      worst = std::max(worst, std::abs(norm(dt) - std::sqrt(sched.alpha_bar(t)) * d0));
    }
  }
  return {worst < 1e-9, fmt("max deviation %.3g (limit 1e-9) over 100 pairs x 1001 steps", worst)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome forward_marginal() {
  const NoiseSchedule sched = linear_schedule(1000, 1e-4, 0.02);
  const Tensor x0 = Tensor::vector({0.9, -0.4, 0.0, 0.6});
  const std::size_t n = 50000;
  bool pass = true;
  std::string detail;
  for (int t : {10, 100, 500}) {
    CounterRng rng(100 + t);
    const std::size_t d = x0.size();
    std::vector<double> sum(d, 0.0), sq(d, 0.0);
    Tensor z({d});
    for (std::size_t k = 0; k < n; ++k) {
      for (double& v : z.data()) v = rng.normal();
      const Tensor xt = diffuse(x0, t, z, sched);
      for (std::size_t i = 0; i < d; ++i) {
        sum[i] += xt[i];
        sq[i] += xt[i] * xt[i];
      }
    }
    const double ab = sched.alpha_bar(t);
    const double var_ref = 1.0 - ab;
    const double se = std::sqrt(var_ref / n);
    double worst_z = 0.0, worst_var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double mean = sum[i] / n;
      const double var = (sq[i] - n * mean * mean) / (n - 1);
      worst_z = std::max(worst_z, std::abs(mean - std::sqrt(ab) * x0[i]) / se);
      worst_var = std::max(worst_var, std::abs(var / var_ref - 1.0));
    }
    pass = pass && worst_z < 4.0 && worst_var < 0.02;
    detail += fmt("t=%d: max |mean err|/SE %.2f, max var rel err %.4f; ", t, worst_z, worst_var);
  }
  return {pass, detail + "limits 4 SE and 2%"};
}

// ---- 3 ---------------------------------------------------------------------

Outcome gradient_audit() {
  using gradcheck::away_from_zero;
  using gradcheck::random_tensor;
  using Make = std::function<std::vector<Tensor>(CounterRng&)>;
  struct Case {
    std::string name;
    Make make;
    gradcheck::Op op;
  };
  auto shapes = [](std::vector<Shape> s) -> Make {
    return [s](CounterRng& r) {
      std::vector<Tensor> out;
      for (const Shape& x : s) out.push_back(random_tensor(x, r));
      return out;
    };
  };
  const Make two = shapes({{3, 4}, {3, 4}});
  const Make one = shapes({{2, 5}});
  const Make kinked = [](CounterRng& r) { return std::vector<Tensor>{away_from_zero({2, 5}, r)}; };
  const std::vector<Case> cases = {
      {"add", two, [](Tape&, auto& v) { return ops::add(v[0], v[1]); }},
      {"sub", two, [](Tape&, auto& v) { return ops::sub(v[0], v[1]); }},
      {"mul", two, [](Tape&, auto& v) { return ops::mul(v[0], v[1]); }},
      {"scale", one, [](Tape&, auto& v) { return ops::scale(v[0], -1.7); }},
      {"relu", kinked, [](Tape&, auto& v) { return ops::relu(v[0]); }},
      {"tanh", one, [](Tape&, auto& v) { return ops::tanh(v[0]); }},
      {"silu", one, [](Tape&, auto& v) { return ops::silu(v[0]); }},
      {"square", one, [](Tape&, auto& v) { return ops::square(v[0]); }},
      {"sum", one, [](Tape&, auto& v) { return ops::sum(v[0]); }},
      {"mean", one, [](Tape&, auto& v) { return ops::mean(v[0]); }},
      {"reshape", one, [](Tape&, auto& v) { return ops::reshape(v[0], {5, 2}); }},
      {"squared_error", two, [](Tape&, auto& v) { return ops::squared_error(v[0], v[1]); }},
      {"matmul", shapes({{3, 4}, {4, 2}}), [](Tape&, auto& v) { return ops::matmul(v[0], v[1]); }},
      {"add_bias", shapes({{3, 4}, {4}}), [](Tape&, auto& v) { return ops::add_bias(v[0], v[1]); }},
      {"conv2d", shapes({{2, 3, 4, 5}, {2, 3, 3, 3}}),
       [](Tape&, auto& v) { return ops::conv2d(v[0], v[1]); }},
      {"conv2d_unbatched", shapes({{2, 4, 4}, {3, 2, 3, 3}}),
       [](Tape&, auto& v) { return ops::conv2d(v[0], v[1]); }},
      {"add_channel_bias", shapes({{2, 3, 2, 2}, {3}}),
       [](Tape&, auto& v) { return ops::add_channel_bias(v[0], v[1]); }},
      {"add_channel_vector", shapes({{2, 3, 2, 2}, {2, 3}}),
       [](Tape&, auto& v) { return ops::add_channel_vector(v[0], v[1]); }},
      {"avg_pool2", shapes({{2, 2, 4, 6}}), [](Tape&, auto& v) { return ops::avg_pool2(v[0]); }},
      {"upsample2", shapes({{2, 2, 4, 6}}), [](Tape&, auto& v) { return ops::upsample2(v[0]); }},
      {"concat_channels", shapes({{2, 1, 2, 2}, {2, 3, 2, 2}}),
       [](Tape&, auto& v) { return ops::concat_channels(v[0], v[1]); }},
  };
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const std::string& name, double e) {
    if (e >= worst) {
      worst = e;
      worst_name = name;
    }
  };
  for (const Case& c : cases) {
    for (std::uint64_t i = 0; i < 10; ++i) {
      CounterRng rng(1000 + i);
      note(c.name, gradcheck::check(c.make(rng), c.op, 2000 + i).rel_error);
    }
  }
  const std::vector<std::pair<std::string, ModelDescriptor>> models = {
      {"mlp denoiser", {Architecture::mlp, ModelRole::denoiser, {3}, 5, {2, 2, 2}, 4}},
      {"conv denoiser", {Architecture::conv, ModelRole::denoiser, {1, 4, 4}, 8, {2, 3, 2}, 4}},
      {"mlp translator", {Architecture::mlp, ModelRole::translator, {2}, 4, {2, 2, 2}, 4}},
      {"conv translator", {Architecture::conv, ModelRole::translator, {1, 4, 4}, 8, {2, 2, 2}, 4}},
      {"affine translator", {Architecture::affine, ModelRole::translator, {2}, 4, {2, 2, 2}, 4}},
  };
  for (const auto& [name, d] : models) {
    for (std::uint64_t i = 0; i < 10; ++i) {
      Model m(d, 3 + i);
      CounterRng rng(17 + i);
      // Output layers start at zero; perturb so every path carries gradient.
      for (Tensor& p : m.parameters()) {
        for (double& v : p.data()) v += rng.uniform(-0.3, 0.3);
      }
      Shape xs{2};
      xs.insert(xs.end(), d.sample_shape.begin(), d.sample_shape.end());
      const Tensor x = gradcheck::random_tensor(xs, rng);
      const std::vector<int> ts{3 + static_cast<int>(i), 7};
      const bool den = d.role == ModelRole::denoiser;
      note(name, gradcheck::check_model(m, x, den ? std::span<const int>(ts)
                                                  : std::span<const int>(),
                                        50 + i)
                     .rel_error);
    }
  }
  return {worst < 1e-5,
          fmt("%zu ops + %zu models x 10 instances, worst rel err %.3g (%s), limit 1e-5",
              cases.size(), models.size(), worst, worst_name.c_str())};
}

// ---- 4-6 -------------------------------------------------------------------

Outcome optimal_mean_realized() {
  const theory::LinearGaussianWorld w = theory::LinearGaussianWorld::random(0);
  const theory::CheckReport sym = theory::check_optimal_mean("optimal_mean", w, 3, 3, 100000, 1);
  return {sym.pass, fmt("affine translator, 1e5 samples, implied-mean gap %.3g (limit 1e-2)",
                        sym.measured)};
}

Outcome residual_constant() {
  const theory::LinearGaussianWorld w = theory::LinearGaussianWorld::random(0);
  const auto thetas = theory::random_thetas(w.d, 5, 2);
  const theory::CheckReport sym = theory::check_constant("sym", w, 3, 3, thetas);
  const theory::CheckReport asym = theory::check_constant("asym", w, 2, 3, thetas);
  return {sym.pass && asym.pass,
          fmt("5 thetas; symmetric max spread/entropy mismatch %.3g, asymmetric %.3g (limit "
              "1e-6, constant %.4f >= 0)",
              sym.measured, asym.measured, sym.details.at("entropy_term").get<double>())};
}

Outcome vlb_bounds_nll() {
  const theory::LinearGaussianWorld w = theory::LinearGaussianWorld::random(0);
  const auto thetas = theory::random_thetas(w.d, 20, 3);
  const theory::CheckReport sym = theory::check_vlb_bound(w, 3, 3, thetas, 1.0);
  const theory::CheckReport asym = theory::check_vlb_bound(w, 2, 3, thetas, 1.0);
  return {sym.pass && asym.pass,
          fmt("20 thetas, T=%d; max (nll - vlb) symmetric %.3g, asymmetric %.3g (limit 1e-8)",
              w.sched.T(), sym.measured, asym.measured)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome curve_shape() {
  const PairedDataset ds = gen_shapes_pair(512, 16, 0);
  const NoiseSchedule sched = scaled_linear_schedule(200);
  const SelectionConfig sel;
  const std::vector<int> ts = sel.timesteps(sched.T());
  const int tol = std::max(2, sched.T() / 10);
  bool pass = true;
  std::vector<int> stars;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DistanceCurve c = compute_curves(ds, sched, CurveMetric::ssim, ts, sel.n_samples, seed);
    auto worst_against = [](const std::vector<double>& v, double sign) {
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      double worst = 0.0;
      for (std::size_t i = 1; i < v.size(); ++i) {
        worst = std::max(worst, sign * (v[i] - v[i - 1]));
      }
      return worst / (*hi - *lo);
    };
    const double src_drop = worst_against(c.d_source, -1.0);
    const double cross_rise = worst_against(c.d_cross, 1.0);
    const int crossings = count_crossings(c);
    const int star = select_t_star(c);
    stars.push_back(star);
    pass = pass && src_drop <= 0.02 && cross_rise <= 0.02 && crossings == 1;
    detail += fmt("seed %d: t*=%d crossings=%d worst d_source drop %.3f, d_cross rise %.3f; ",
                  static_cast<int>(seed), star, crossings, src_drop, cross_rise);
  }
  std::vector<int> sorted = stars;
  std::sort(sorted.begin(), sorted.end());
  const int median = sorted[2];
  int spread = 0;
  for (int s : stars) spread = std::max(spread, std::abs(s - median));
  pass = pass && spread <= tol;
  return {pass, detail + fmt("max |t* - median| %d (limit %d)", spread, tol)};
}

// ---- 8 ---------------------------------------------------------------------

Outcome diagonal_argmin() {
  const NoiseSchedule sched = scaled_linear_schedule(200);
  const int step = 20;
  const std::vector<int> grid = timestep_grid(sched.T(), step);
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<std::string, PairedDataset>> sets = {
      {"shapes", gen_shapes_pair(64, 16, 0)}, {"gray2color", gen_gray2color_pair(64, 16, 0)}};
  for (const auto& [name, ds] : sets) {
    const GridSearchResult r = grid_search_st(ds.x0(), ds.y0(), sched, grid, grid, 0.5, 16, 7);
    double diag_best = 1e300;
    for (const GridCell& c : r.cells) {
      if (c.s == c.t) diag_best = std::min(diag_best, c.dist);
    }
    double best = 1e300;
    for (const GridCell& c : r.cells) best = std::min(best, c.dist);
    pass = pass && std::abs(r.s_star - r.t_star) <= step;
    detail += fmt("%s: argmin (s,t)=(%d,%d) dist %.3f, best diagonal %.3f; ", name.c_str(),
                  r.s_star, r.t_star, best, diag_best);
  }
  return {pass, detail + fmt("limit |s-t| <= %d", step)};
}

// ---- 9 ---------------------------------------------------------------------

Outcome max_triplet() {
  CounterRng rng(9);
  std::size_t violations = 0, false_equal = 0;
  for (int k = 0; k < 100000; ++k) {
    const double a = rng.uniform(0, 3), b = rng.uniform(0, 3), c = rng.uniform(0, 3);
    const TripletBound r = max_triplet_bound(a, b, c);
    if (r.max < r.mean) ++violations;
    if (r.equality) ++false_equal;
  }
  std::size_t missed = 0;
  for (int k = 0; k < 1000; ++k) {
    const double a = rng.uniform(0, 3);
    const TripletBound eq = max_triplet_bound(a, a, a);
    if (!eq.equality) ++missed;
    // One coordinate nudged: no longer equal.
    if (max_triplet_bound(a, a, a + 1e-6).equality) ++false_equal;
  }
  return {violations == 0 && false_equal == 0 && missed == 0,
          fmt("1e5 random triples: %zu violations, %zu spurious equality flags; 1000 equal "
              "triples: %zu missed",
              violations, false_equal, missed)};
}

// ---- 10, 11 ----------------------------------------------------------------

struct Pipeline {
  bool ready = false;
  std::string error;
  fs::path dir, data, ddpm, dmt;
  int t_star = 0;
  double ddpm_seconds = 0.0;
  double total_seconds = 0.0;
};

Pipeline pipeline;

/// gen-data, train-ddpm, train-dmt (t auto) through the CLI.
void build_pipeline() {
  const Clock::time_point t0 = Clock::now();
  pipeline.dir = kWork / "pipeline";
  fs::create_directories(pipeline.dir);
  pipeline.data = pipeline.dir / "shapes16.dmtdata";
  pipeline.ddpm = pipeline.dir / "ddpm" / "ddpm.ckpt";
  pipeline.dmt = pipeline.dir / "dmt" / "dmt.ckpt";
  const fs::path config = pipeline.dir / "config.json";
  const nlohmann::json cfg = {
      {"schedule", scaled_linear_schedule(200).to_json()},
      {"ddpm", {{"epochs", 50}, {"batch_size", 32}, {"adam", {{"lr", 2e-3}}}, {"final_lr", 1e-5}}},
      {"dmt", {{"t", "auto"}, {"epochs", 30}, {"adam", {{"lr", 1e-3}}}}},
      {"seed", 0}};
  std::ofstream(config) << cfg.dump(2);
  if (cli({"gen-data", "--generator", "shapes", "--n", "512", "--size", "16", "--seed", "0",
           "--out", pipeline.data.string()}) != 0) {
    pipeline.error = "gen-data failed";
    return;
  }
  const Clock::time_point d0 = Clock::now();
  if (cli({"train-ddpm", "--data", pipeline.data.string(), "--config", config.string(),
           "--out-ckpt", pipeline.ddpm.string()}) != 0) {
    pipeline.error = "train-ddpm failed";
    return;
  }
  pipeline.ddpm_seconds = seconds_since(d0);
  if (cli({"train-dmt", "--data", pipeline.data.string(), "--config", config.string(),
           "--ddpm-ckpt", pipeline.ddpm.string(), "--out-ckpt", pipeline.dmt.string()}) != 0) {
    pipeline.error = "train-dmt failed";
    return;
  }
  pipeline.t_star = load_checkpoint(pipeline.dmt, ModelRole::translator).meta.extra.at("t");
  pipeline.total_seconds = seconds_since(t0);
  pipeline.ready = true;
}

struct Translated {
  Tensor y;
  int nfe = -1;
  double seconds = 0.0;
};

Translated translate_cli(const std::string& sampler) {
  const Clock::time_point t0 = Clock::now();
  const fs::path out = pipeline.dir / ("translate_" + sampler.substr(0, sampler.find(':')));
  Translated r;
  if (cli({"translate", "--in-dataset", pipeline.data.string(), "--split", "test", "--dmt-ckpt",
           pipeline.dmt.string(), "--ddpm-ckpt", pipeline.ddpm.string(), "--sampler", sampler,
           "--seed", "0", "--max-images", "8", "--out-dir", out.string()}) != 0) {
    return r;
  }
  const auto manifest = nlohmann::json::parse(io::read_file(out / "manifest.json"));
  r.nfe = manifest.at("nfe");
  r.y = load_dataset(out / "translated.dmtdata").y0();
  r.seconds = seconds_since(t0);
  return r;
}

Translated translated_ddim;

Outcome end_to_end() {
  if (!pipeline.ready) build_pipeline();
  if (!pipeline.ready) return {false, pipeline.error};
  const Clock::time_point t0 = Clock::now();
  translated_ddim = translate_cli("ddim:10");
  if (translated_ddim.nfe < 0) return {false, "translate failed"};

  // Untrained pipeline: same denoiser, sampler, seed and clamping, with a
  // freshly initialized translator (which starts as the identity).
  const PairedDataset ds = load_dataset(pipeline.data);
  const Checkpoint dn = load_checkpoint(pipeline.ddpm, ModelRole::denoiser);
  const Checkpoint tr = load_checkpoint(pipeline.dmt, ModelRole::translator);
  const NoiseSchedule sched = NoiseSchedule::from_json(dn.meta.schedule);
  DmtConfig cfg;
  cfg.t = pipeline.t_star;
  cfg.sampler = SamplerSpec::parse("ddim:10");
  const Model fresh(tr.model.descriptor(), 0);
  TranslateResult base = translate_rows(ds.test_x0(), fresh, dn.model, cfg, sched, 0);
  for (double& v : base.y.data()) v = std::clamp(v, -1.0, 1.0);

  const Tensor x = ds.test_x0(), y = ds.test_y0();
  const Featurizer f = default_featurizer(ds.sample_shape());
  const double l2_trained = mean_l2(translated_ddim.y, y);
  const double l2_untrained = mean_l2(base.y, y);
  const double fid_trained = toy_fid(translated_ddim.y, y, f);
  const double fid_source = toy_fid(x, y, f);
  const double total = pipeline.total_seconds + seconds_since(t0);
  const double l2_ratio = l2_trained / l2_untrained;
  const double fid_ratio = fid_trained / fid_source;
  const bool pass = l2_ratio <= 0.5 && fid_ratio <= 0.5 && pipeline.ddpm_seconds <= 600.0 &&
                    total <= 1200.0;
  return {pass,
          fmt("shapes 16x16, %zu test pairs, auto t*=%d, ddim:10; L2 %.4f vs untrained %.4f "
              "(ratio %.3f, limit 0.5); toy-FID %.4f vs source %.4f (ratio %.3f, limit 0.5); "
              "DDPM train %.0f s (limit 600), pipeline %.0f s (limit 1200)",
              ds.n_test(), pipeline.t_star, l2_trained, l2_untrained, l2_ratio, fid_trained,
              fid_source, fid_ratio, pipeline.ddpm_seconds, total)};
}

Outcome ddim_acceleration() {
  if (!pipeline.ready) build_pipeline();
  if (!pipeline.ready) return {false, pipeline.error};
  if (translated_ddim.nfe < 0) translated_ddim = translate_cli("ddim:10");
  const Translated anc = translate_cli("ancestral");
  if (translated_ddim.nfe < 0 || anc.nfe < 0) return {false, "translate failed"};
  const PairedDataset ds = load_dataset(pipeline.data);
  const Featurizer f = default_featurizer(ds.sample_shape());
  const double fid_ddim = toy_fid(translated_ddim.y, ds.test_y0(), f);
  const double fid_anc = toy_fid(anc.y, ds.test_y0(), f);
  const double rel = std::abs(fid_ddim - fid_anc) / fid_anc;
  const bool pass = translated_ddim.nfe == 10 && rel <= 0.25;
  return {pass, fmt("t*=%d; manifest nfe ddim:10 = %d, ancestral = %d; toy-FID ddim %.4f vs "
                    "ancestral %.4f (rel diff %.3f, limit 0.25); translation %.1f s + %.1f s",
                    pipeline.t_star, translated_ddim.nfe, anc.nfe, fid_ddim, fid_anc, rel,
                    translated_ddim.seconds, anc.seconds)};
}

// ---- 12 --------------------------------------------------------------------

Outcome asymmetric_reduction() {
  const PairedDataset ds = gen_moons_pair(400, M_PI / 2.0, 0.05, 3);
  const NoiseSchedule sched = scaled_linear_schedule(100);
  Model den(default_descriptor(ModelRole::denoiser, ds.sample_shape()), 1);
  TrainConfig tc;
  tc.epochs = 5;
  train_ddpm(ds.train_y0(), den, tc, sched);

  DmtConfig sym;
  sym.t = 20;
  sym.epochs = 5;
  sym.seed = 4;
  sym.sampler = SamplerSpec::parse("ancestral");
  DmtConfig asym = sym;
  asym.s = 20;
  const ModelDescriptor desc = default_descriptor(ModelRole::translator, ds.sample_shape());
  Model a(desc, 2), b(desc, 2);
  const std::vector<double> la = dmt_train(ds, a, sym, sched);
  const std::vector<double> lb = dmt_train_asym(ds, b, asym, sched);
  bool same_params = true;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    same_params = same_params &&
                  std::ranges::equal(a.parameters()[i].data(), b.parameters()[i].data());
  }
  bool same_out = true;
  for (const char* sampler : {"ancestral", "ddim:10"}) {
    sym.sampler = asym.sampler = SamplerSpec::parse(sampler);
    const TranslateResult ya = translate_rows(ds.test_x0(), a, den, sym, sched, 7);
    const TranslateResult yb = translate_rows(ds.test_x0(), b, den, asym, sched, 7);
    same_out = same_out && ya.nfe == yb.nfe && std::ranges::equal(ya.y.data(), yb.y.data());
  }
  return {la == lb && same_params && same_out,
          fmt("moons, t=20: loss curves %s, parameters %s, translations (ancestral, ddim:10) %s",
              la == lb ? "identical" : "differ", same_params ? "identical" : "differ",
              same_out ? "identical" : "differ")};
}

// ---- 13 --------------------------------------------------------------------

Outcome dirac_guard() {
  const PairedDataset ok = gen_moons_pair(100, 1.0, 0.05, 0);
  bool ctor = false, gen = false, train = false;
  try {
    PairedDataset bad(ok.x0(), ok.x0(), 80, {});
  } catch (const DiracDegeneracyError&) {
    ctor = true;
  }
  try {
    gen_moons_pair(100, 0.0, 0.05, 0);
  } catch (const DiracDegeneracyError&) {
    gen = true;
  }
  Model m(default_descriptor(ModelRole::translator, ok.sample_shape()), 0);
  const std::vector<Tensor> before = m.parameters();
  int epochs_run = 0;
  DmtConfig cfg;
  cfg.t = 10;
  try {
    dmt_train_tensors(ok.train_x0(), ok.train_x0(), m, cfg, scaled_linear_schedule(100),
                      [&](int, double) { ++epochs_run; });
  } catch (const DiracDegeneracyError&) {
    train = true;
  }
  bool untouched = true;
  for (std::size_t i = 0; i < before.size(); ++i) {
    untouched = untouched && std::ranges::equal(before[i].data(), m.parameters()[i].data());
  }
  return {ctor && gen && train && epochs_run == 0 && untouched,
          fmt("dataset constructor %s, generator %s, training %s; epochs run %d, parameters %s",
              ctor ? "rejects" : "accepts", gen ? "rejects" : "accepts",
              train ? "rejects" : "accepts", epochs_run, untouched ? "unchanged" : "changed")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "shared-noise contraction", 5, shared_noise_contraction},
      {2, "forward marginal law", 30, forward_marginal},
      {3, "gradient audit", 60, gradient_audit},
      {4, "optimal translator mean", 120, optimal_mean_realized},
      {5, "bound residual is a constant", 30, residual_constant},
      {6, "vlb bounds nll", 60, vlb_bounds_nll},
      {7, "distance curve shape", 300, curve_shape},
      {8, "diagonal (s,t) optimum", 600, diagonal_argmin},
      {9, "max-triplet inequality", 5, max_triplet},
      {10, "end-to-end translation quality", 1200, end_to_end},
      {11, "ddim acceleration", 300, ddim_acceleration},
      {12, "asymmetric reduces to symmetric", 120, asymmetric_reduction},
      {13, "degenerate pair guard", 1, dirac_guard},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  fs::remove_all(kWork);
  fs::create_directories(kWork);
  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const Clock::time_point t0 = Clock::now();
    const bool had_pipeline = pipeline.ready;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = seconds_since(t0);
    // The shared pipeline build is charged to 10, not 11.
    if (c.id == 11 && !had_pipeline && pipeline.ready) secs -= pipeline.total_seconds;
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << "  #" << c.id << " " << c.name << ": " << o.detail
              << fmt(" [%.2f s, limit %.0f s%s]", secs, c.limit_s, in_time ? "" : ", too slow")
              << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : fmt("%d criteria failed", failed)) << "\n";
  return failed == 0 ? 0 : 1;
}
