#include "dmt/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmt/binary_io.hpp"
#include "dmt/checkpoint.hpp"
#include "dmt/data.hpp"
#include "dmt/ddpm_train.hpp"
#include "dmt/dmt.hpp"
#include "dmt/errors.hpp"
#include "dmt/experiment_config.hpp"
#include "dmt/image_io.hpp"
#include "dmt/metrics.hpp"
#include "dmt/parallel.hpp"
#include "dmt/theory.hpp"
#include "dmt/timestep_select.hpp"

namespace dmt {

namespace fs = std::filesystem;

int exit_code_for(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const TrainingDivergedError&) {
    return 3;
  } catch (const SelectionError&) {
    return 4;
  } catch (const CompatibilityError&) {
    return 5;
  } catch (const ValidationError&) {
    return 2;
  } catch (const DimensionError&) {
    return 2;
  } catch (const IndexError&) {
    return 2;
  } catch (const ContractError&) {
    return 2;
  } catch (const ParseError&) {
    return 2;
  } catch (const UnsupportedError&) {
    return 2;
  } catch (...) {
    return 1;
  }
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string shape_text(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
}

fs::path parent_dir(const fs::path& file) {
  const fs::path p = file.parent_path();
  return p.empty() ? fs::path(".") : p;
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  return parent_dir(file) / (file.stem().string() + suffix);
}

Tensor split_rows(const PairedDataset& ds, const std::string& split, bool target) {
  if (split == "all") return target ? ds.y0() : ds.x0();
  if (split == "train") return target ? ds.train_y0() : ds.train_x0();
  if (split == "test") {
    if (ds.n_test() == 0) throw ValidationError("dataset has an empty test split");
    return target ? ds.test_y0() : ds.test_x0();
  }
  throw ValidationError("split must be all, train or test, got '" + split + "'");
}

bool is_image_path(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

Tensor as_batch(const Tensor& sample) {
  Shape s{1};
  s.insert(s.end(), sample.shape().begin(), sample.shape().end());
  return sample.reshaped(s);
}

Tensor row(const Tensor& batch, std::size_t i) {
  const Shape s(batch.shape().begin() + 1, batch.shape().end());
  return batch.slice_leading(i, 1).reshaped(s);
}

// ---- gen-data --------------------------------------------------------------

struct GenArgs {
  std::string generator;
  std::size_t n = 512;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t size = 12;
  double rotation = std::numbers::pi / 2.0;
  double noise = 0.05;
};

int cmd_gen_data(const GenArgs& a) {
  const PairedDataset ds = [&] {
    if (a.generator == "moons") return gen_moons_pair(a.n, a.rotation, a.noise, a.seed);
    if (a.generator == "shapes") return gen_shapes_pair(a.n, a.size, a.seed);
    if (a.generator == "gray2color") return gen_gray2color_pair(a.n, a.size, a.seed);
    throw ValidationError("unknown generator '" + a.generator + "'");
  }();
  save_dataset(ds, a.out);
  std::cout << "wrote " << ds.size() << " pairs (" << a.generator << ", sample shape "
            << shape_text(ds.sample_shape()) << ", train " << ds.n_train() << ", test "
            << ds.n_test() << ") to " << a.out << " hash=" << io::hex64(dataset_hash(ds)) << "\n";
  return 0;
}

// ---- train-ddpm ------------------------------------------------------------

struct TrainDdpmArgs {
  std::string data;
  std::string config;
  std::string out_ckpt;
};

int cmd_train_ddpm(const TrainDdpmArgs& a) {
  const ExperimentConfig cfg = load_config(a.config);
  const PairedDataset ds = load_dataset(a.data);
  Model model(cfg.denoiser_for(ds.sample_shape()), CounterRng(cfg.ddpm.seed).derive(7).next_u64());
  const int epochs = cfg.ddpm.epochs;
  const std::vector<double> curve =
      train_ddpm(ds.train_y0(), model, cfg.ddpm, cfg.schedule, [&](int e, double loss) {
        std::cerr << "epoch " << e << "/" << epochs << " loss=" << fmt(loss) << "\n";
      });

  const fs::path out(a.out_ckpt);
  fs::create_directories(parent_dir(out));
  CheckpointMeta meta{cfg.schedule.to_json(), cfg.hash(), cfg.ddpm.adam,
                      {{"dataset_hash", io::hex64(dataset_hash(ds))}, {"epochs", epochs}}};
  save_checkpoint(model, meta, out);
  write_curve_csv(sibling(out, ".loss.csv"), curve);
  write_resolved_config(cfg, parent_dir(out));
  std::cout << "final_loss=" << fmt(curve.back()) << "\n";
  return 0;
}

// ---- select-timestep -------------------------------------------------------

struct SelectArgs {
  std::string data;
  std::string config;
  std::string metric;
  std::string out;
  std::string curves;
  long long seed = -1;
  std::size_t n_samples = 0;
};

int cmd_select(const SelectArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (!a.metric.empty()) cfg.selection.metric = parse_curve_metric(a.metric);
  if (a.seed >= 0) cfg.selection.seed = static_cast<std::uint64_t>(a.seed);
  if (a.n_samples > 0) cfg.selection.n_samples = a.n_samples;
  DistanceCurve curve;
  if (!a.curves.empty()) {
    curve = read_curves_csv(a.curves);
    curve.metric = cfg.selection.metric;
  } else {
    if (a.data.empty()) throw ValidationError("select-timestep needs --data or --curves");
    const PairedDataset ds = load_dataset(a.data);
    const std::vector<int> ts = cfg.selection.timesteps(cfg.schedule.T());
    curve = compute_curves(ds, cfg.schedule, cfg.selection.metric, ts, cfg.selection.n_samples,
                           cfg.selection.seed);
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  write_curves_csv(out / "curves.csv", curve);
  write_resolved_config(cfg, out);
  const int t_star = select_t_star(curve);
  io::write_file(out / "t_star.txt", "t_star=" + std::to_string(t_star) + "\n");
  std::cout << "t_star=" << t_star << "\n";
  return 0;
}

// ---- train-dmt -------------------------------------------------------------

struct TrainDmtArgs {
  std::string data;
  std::string config;
  std::string ddpm_ckpt;
  std::string t;
  int s = -1;
  std::string out_ckpt;
};

int cmd_train_dmt(const TrainDmtArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  const PairedDataset ds = load_dataset(a.data);
  const Checkpoint ddpm = load_checkpoint(a.ddpm_ckpt, ModelRole::denoiser);
  const NoiseSchedule sched = NoiseSchedule::from_json(ddpm.meta.schedule);
  if (ddpm.model.descriptor().sample_shape != ds.sample_shape()) {
    throw CompatibilityError("denoiser checkpoint sample shape " +
                             shape_text(ddpm.model.descriptor().sample_shape) +
                             " does not match the data " + shape_text(ds.sample_shape()));
  }
  cfg.schedule = sched;
  if (!a.t.empty()) {
    if (a.t == "auto") {
      cfg.t_auto = true;
    } else {
      try {
        std::size_t used = 0;
        cfg.dmt.t = std::stoi(a.t, &used);
        if (used != a.t.size()) throw std::invalid_argument(a.t);
      } catch (const std::exception&) {
        throw ValidationError("--t must be 'auto' or an integer, got '" + a.t + "'");
      }
      cfg.t_auto = false;
    }
  }
  if (a.s >= 0) cfg.dmt.s = a.s;

  const fs::path out(a.out_ckpt);
  fs::create_directories(parent_dir(out));
  nlohmann::json extra = {{"dataset_hash", io::hex64(dataset_hash(ds))},
                          {"ddpm_config_hash", ddpm.meta.config_hash},
                          {"t_auto", cfg.t_auto}};
  if (cfg.t_auto) {
    const DistanceCurve curve =
        compute_curves(ds, sched, cfg.selection.metric, cfg.selection.timesteps(sched.T()),
                       cfg.selection.n_samples, cfg.selection.seed);
    write_curves_csv(sibling(out, ".selection.csv"), curve);
    cfg.dmt.t = select_t_star(curve);
    cfg.t_auto = false;
    std::cerr << "resolved t_star=" << cfg.dmt.t << "\n";
  }
  cfg.dmt.validate_for_training(sched);

  Model translator(cfg.translator_for(ds.sample_shape()),
                   CounterRng(cfg.dmt.seed).derive(7).next_u64());
  const int epochs = cfg.dmt.epochs;
  const auto hook = [&](int e, double loss) {
    std::cerr << "epoch " << e << "/" << epochs << " loss=" << fmt(loss) << "\n";
  };
  const std::vector<double> curve = cfg.dmt.symmetric()
                                        ? dmt_train(ds, translator, cfg.dmt, sched, hook)
                                        : dmt_train_asym(ds, translator, cfg.dmt, sched, hook);

  extra["s"] = cfg.dmt.source_step();
  extra["t"] = cfg.dmt.t;
  extra["weighting"] = to_string(cfg.dmt.weighting);
  extra["sampler"] = cfg.dmt.sampler.to_string();
  save_checkpoint(translator, CheckpointMeta{sched.to_json(), cfg.hash(), cfg.dmt.adam, extra},
                  out);
  write_curve_csv(sibling(out, ".loss.csv"), curve);
  write_resolved_config(cfg, parent_dir(out));
  std::cout << "s=" << cfg.dmt.source_step() << " t=" << cfg.dmt.t
            << " final_loss=" << fmt(curve.back()) << "\n";
  return 0;
}

// ---- translate -------------------------------------------------------------

struct TranslateArgs {
  std::string in_dataset;
  std::string in_image;
  std::string dmt_ckpt;
  std::string ddpm_ckpt;
  std::string sampler;
  std::string out_dir;
  std::string split = "test";
  std::uint64_t seed = 0;
  std::size_t max_images = 16;
};

struct LoadedPipeline {
  Checkpoint translator;
  Checkpoint denoiser;
  NoiseSchedule sched;
  DmtConfig cfg;
};

LoadedPipeline load_pipeline(const std::string& dmt_path, const std::string& ddpm_path) {
  Checkpoint tr = load_checkpoint(dmt_path, ModelRole::translator);
  Checkpoint dn = load_checkpoint(ddpm_path, ModelRole::denoiser);
  if (tr.meta.schedule != dn.meta.schedule) {
    throw CompatibilityError("translator and denoiser checkpoints use different noise schedules");
  }
  if (tr.model.descriptor().sample_shape != dn.model.descriptor().sample_shape) {
    throw CompatibilityError("translator and denoiser checkpoints disagree on the sample shape");
  }
  const nlohmann::json& extra = tr.meta.extra;
  if (!extra.contains("t") || !extra.contains("s")) {
    throw CompatibilityError("translator checkpoint does not record its timesteps");
  }
  DmtConfig cfg;
  cfg.t = extra.at("t").get<int>();
  cfg.s = extra.at("s").get<int>();
  if (cfg.s == cfg.t) cfg.s = -1;
  if (extra.contains("sampler")) cfg.sampler = SamplerSpec::parse(extra.at("sampler"));
  NoiseSchedule sched = NoiseSchedule::from_json(tr.meta.schedule);
  return {std::move(tr), std::move(dn), std::move(sched), cfg};
}

int cmd_translate(const TranslateArgs& a) {
  if (a.in_dataset.empty() == a.in_image.empty()) {
    throw ValidationError("translate needs exactly one of --in-dataset and --in-image");
  }
  LoadedPipeline p = load_pipeline(a.dmt_ckpt, a.ddpm_ckpt);
  if (!a.sampler.empty()) p.cfg.sampler = SamplerSpec::parse(a.sampler);
  const Shape& shape = p.translator.model.descriptor().sample_shape;

  Tensor source;
  std::optional<PairedDataset> ds;
  if (!a.in_dataset.empty()) {
    ds = load_dataset(a.in_dataset);
    source = split_rows(*ds, a.split, false);
  } else {
    source = as_batch(read_pnm(a.in_image));
  }
  const Shape in_shape(source.shape().begin() + 1, source.shape().end());
  if (in_shape != shape) {
    throw CompatibilityError("input sample shape " + shape_text(in_shape) +
                             " does not match the checkpoints' " + shape_text(shape));
  }

  TranslateResult r =
      translate_rows(source, p.translator.model, p.denoiser.model, p.cfg, p.sched, a.seed);
  std::size_t clamped = 0;
  for (double& v : r.y.data()) {
    if (v < -1.0 || v > 1.0) {
      v = std::clamp(v, -1.0, 1.0);
      ++clamped;
    }
  }

  const fs::path out(a.out_dir);
  fs::create_directories(out);
  nlohmann::json outputs = nlohmann::json::array();
  const std::size_t n = source.dim(0);
  if (ds) {
    PairedDataset result(source, r.y, n,
                         DatasetInfo{"translate", a.seed,
                                     {{"source", a.in_dataset}, {"split", a.split}}});
    save_dataset(result, out / "translated.dmtdata");
    outputs.push_back("translated.dmtdata");
  }
  if (shape.size() == 3) {
    const std::string ext = shape[0] == 1 ? ".pgm" : ".ppm";
    const std::size_t count = ds ? std::min(n, a.max_images) : n;
    for (std::size_t i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "translated_%04zu", i);
      write_pnm(row(r.y, i), out / (name + ext));
      outputs.push_back(name + ext);
    }
  }
  const nlohmann::json manifest = {
      {"source", ds ? a.in_dataset : a.in_image},
      {"split", ds ? a.split : "image"},
      {"n", n},
      {"seed", a.seed},
      {"row_streams", "CounterRng(seed).derive(row)"},
      {"s", p.cfg.source_step()},
      {"t", p.cfg.t},
      {"sampler", p.cfg.sampler.to_string()},
      {"nfe", r.nfe},
      {"clamped_values", clamped},
      {"translator_config_hash", p.translator.meta.config_hash},
      {"denoiser_config_hash", p.denoiser.meta.config_hash},
      {"outputs", outputs}};
  io::write_file(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "translated " << n << " samples, nfe=" << r.nfe << "\n";
  return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string target;
  std::string metrics = "ssim,psnr,l1,l2,toyfid";
  std::string out;
  std::string pred_split = "all";
  std::string target_split = "all";
  std::string featurizer;
};

Tensor load_samples(const std::string& path, const std::string& split) {
  if (is_image_path(path)) return as_batch(read_pnm(path));
  return split_rows(load_dataset(path), split, true);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ValidationError("empty metric list");
  return out;
}

int cmd_evaluate(const EvalArgs& a) {
  const Tensor pred = load_samples(a.pred, a.pred_split);
  const Tensor target = load_samples(a.target, a.target_split);
  if (pred.shape() != target.shape()) {
    throw DimensionError("prediction shape " + shape_text(pred.shape()) +
                         " does not match target shape " + shape_text(target.shape()));
  }
  const std::size_t n = pred.dim(0);
  const Shape sample(pred.shape().begin() + 1, pred.shape().end());
  std::string csv = "metric,value\n";
  for (const std::string& m : split_list(a.metrics)) {
    double value = 0.0;
    std::string label = m;
    if (m == "toyfid") {
      const Featurizer f =
          a.featurizer.empty() ? default_featurizer(sample) : parse_featurizer(a.featurizer);
      value = toy_fid(pred, target, f);
      label = "toy_fid";
    } else {
      double (*fn)(const Tensor&, const Tensor&) = nullptr;
      if (m == "ssim") {
        fn = [](const Tensor& x, const Tensor& y) { return ssim(x, y); };
      } else if (m == "psnr") {
        fn = [](const Tensor& x, const Tensor& y) { return psnr(x, y); };
      } else if (m == "l1") {
        fn = l1;
      } else if (m == "l2") {
        fn = l2;
      } else {
        throw ValidationError("unknown metric '" + m + "'");
      }
      for (std::size_t i = 0; i < n; ++i) value += fn(row(pred, i), row(target, i));
      value /= static_cast<double>(n);
    }
    csv += label + "," + fmt(value) + "\n";
    std::cout << label << "=" << fmt(value) << "\n";
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_file(out / "eval.csv", csv);
  return 0;
}

// ---- validate-theory -------------------------------------------------------

struct TheoryArgs {
  std::uint64_t world_seed = 0;
  std::string out;
  double sigma_scale = 1.0;
  std::size_t train_samples = 100000;
  int s = 2;
  int t = 3;
};

int cmd_validate_theory(const TheoryArgs& a) {
  theory::SuiteOptions opt;
  opt.world_seed = a.world_seed;
  opt.sigma_scale = a.sigma_scale;
  opt.train_samples = a.train_samples;
  opt.s = a.s;
  opt.t = a.t;
  const std::vector<theory::CheckReport> reports = theory::run_suite(opt);
  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_file(out / "theory_report.json", theory::report_json(reports, opt).dump(2) + "\n");
  std::string failing;
  for (const theory::CheckReport& r : reports) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " measured=" << fmt(r.measured)
              << " tolerance=" << fmt(r.tolerance) << "\n";
    if (!r.pass) failing += (failing.empty() ? "" : ", ") + r.name;
  }
  if (!failing.empty()) {
    std::cerr << "failing checks: " << failing << "\n";
    return 6;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  configure_threads_from_env();
  CLI::App app{"Paired translation with a frozen diffusion model"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a paired toy dataset");
  c_gen->add_option("--generator", gen.generator, "moons, shapes or gray2color")->required();
  c_gen->add_option("--n", gen.n, "Number of pairs");
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--out", gen.out, "Dataset file")->required();
  c_gen->add_option("--size", gen.size, "Image side for image generators");
  c_gen->add_option("--rotation", gen.rotation, "Moons rotation in radians");
  c_gen->add_option("--noise", gen.noise, "Moons noise standard deviation");

  TrainDdpmArgs tddpm;
  auto* c_tddpm = app.add_subcommand("train-ddpm", "Train the target-domain denoiser");
  c_tddpm->add_option("--data", tddpm.data)->required();
  c_tddpm->add_option("--config", tddpm.config, "Experiment config JSON");
  c_tddpm->add_option("--out-ckpt", tddpm.out_ckpt)->required();

  SelectArgs sel;
  auto* c_sel = app.add_subcommand("select-timestep", "Pick t from the distance-curve crossing");
  c_sel->add_option("--data", sel.data);
  c_sel->add_option("--config", sel.config);
  c_sel->add_option("--metric", sel.metric, "ssim, psnr, l1 or l2");
  c_sel->add_option("--out", sel.out, "Output directory")->required();
  c_sel->add_option("--curves", sel.curves, "Select from an existing curves CSV");
  c_sel->add_option("--seed", sel.seed);
  c_sel->add_option("--n-samples", sel.n_samples);

  TrainDmtArgs tdmt;
  auto* c_tdmt = app.add_subcommand("train-dmt", "Train the translator at timestep t (or s, t)");
  c_tdmt->add_option("--data", tdmt.data)->required();
  c_tdmt->add_option("--config", tdmt.config);
  c_tdmt->add_option("--ddpm-ckpt", tdmt.ddpm_ckpt)->required();
  c_tdmt->add_option("--t", tdmt.t, "auto or an integer timestep");
  c_tdmt->add_option("--s", tdmt.s, "Source timestep (asymmetric pipeline)");
  c_tdmt->add_option("--out-ckpt", tdmt.out_ckpt)->required();

  TranslateArgs tr;
  auto* c_tr = app.add_subcommand("translate", "Translate a dataset split or one image");
  c_tr->add_option("--in-dataset", tr.in_dataset);
  c_tr->add_option("--in-image", tr.in_image);
  c_tr->add_option("--dmt-ckpt", tr.dmt_ckpt)->required();
  c_tr->add_option("--ddpm-ckpt", tr.ddpm_ckpt)->required();
  c_tr->add_option("--sampler", tr.sampler, "ancestral or ddim:N");
  c_tr->add_option("--out-dir", tr.out_dir)->required();
  c_tr->add_option("--split", tr.split, "all, train or test");
  c_tr->add_option("--seed", tr.seed);
  c_tr->add_option("--max-images", tr.max_images);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Compare predictions with targets");
  c_ev->add_option("--pred", ev.pred)->required();
  c_ev->add_option("--target", ev.target)->required();
  c_ev->add_option("--metrics", ev.metrics, "Comma-separated: ssim,psnr,l1,l2,toyfid");
  c_ev->add_option("--out", ev.out, "Output directory")->required();
  c_ev->add_option("--pred-split", ev.pred_split);
  c_ev->add_option("--target-split", ev.target_split);
  c_ev->add_option("--featurizer", ev.featurizer, "flatten or avgpool4");

  TheoryArgs th;
  auto* c_th = app.add_subcommand("validate-theory", "Closed-form checks on a Gaussian world");
  c_th->add_option("--world-seed", th.world_seed);
  c_th->add_option("--out", th.out, "Output directory")->required();
  c_th->add_option("--sigma-scale", th.sigma_scale, "Scale on the sampler's reverse noise");
  c_th->add_option("--train-samples", th.train_samples);
  c_th->add_option("--s", th.s);
  c_th->add_option("--t", th.t);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*c_gen) return cmd_gen_data(gen);
    if (*c_tddpm) return cmd_train_ddpm(tddpm);
    if (*c_sel) return cmd_select(sel);
    if (*c_tdmt) return cmd_train_dmt(tdmt);
    if (*c_tr) return cmd_translate(tr);
    if (*c_ev) return cmd_evaluate(ev);
    if (*c_th) return cmd_validate_theory(th);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(std::current_exception());
  }
  return 1;
}

}  // namespace dmt
