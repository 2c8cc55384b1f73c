#include "dmt/experiment_config.hpp"

#include <algorithm>

#include "dmt/binary_io.hpp"
#include "dmt/errors.hpp"

namespace dmt {

std::vector<int> SelectionConfig::timesteps(int T) const {
  if (step < 0) throw ValidationError("selection step must be >= 0");
  const int s = step == 0 ? std::max(1, T / 40) : step;
  return timestep_grid(T, s);
}

namespace {

nlohmann::json descriptor_json(const std::optional<ModelDescriptor>& d) {
  return d ? d->to_json() : nlohmann::json(nullptr);
}

std::optional<ModelDescriptor> descriptor_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return ModelDescriptor::from_json(j.at(key));
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json dmt_json = dmt.to_json();
  if (t_auto) dmt_json["t"] = "auto";
  return {{"dataset", dataset},
          {"schedule", schedule.to_json()},
          {"denoiser", descriptor_json(denoiser)},
          {"translator", descriptor_json(translator)},
          {"ddpm", ddpm.to_json()},
          {"dmt", dmt_json},
          {"selection",
           {{"metric", to_string(selection.metric)},
            {"n_samples", selection.n_samples},
            {"step", selection.step},
            {"seed", selection.seed}}},
          {"metrics", metrics},
          {"seed", seed}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) c.dataset = j.at("dataset");
    if (j.contains("schedule")) c.schedule = NoiseSchedule::from_json(j.at("schedule"));
    c.denoiser = descriptor_from(j, "denoiser");
    c.translator = descriptor_from(j, "translator");
    if (j.contains("ddpm")) c.ddpm = TrainConfig::from_json(j.at("ddpm"));
    if (j.contains("dmt")) {
      nlohmann::json d = j.at("dmt");
      if (d.contains("t") && d.at("t").is_string()) {
        if (d.at("t").get<std::string>() != "auto") {
          throw ValidationError("dmt.t must be an integer or \"auto\"");
        }
        c.t_auto = true;
        d.erase("t");
      }
      c.dmt = DmtConfig::from_json(d);
    }
    if (j.contains("selection")) {
      const nlohmann::json& s = j.at("selection");
      c.selection.metric =
          parse_curve_metric(s.value("metric", to_string(c.selection.metric)));
      c.selection.n_samples = s.value("n_samples", c.selection.n_samples);
      c.selection.step = s.value("step", c.selection.step);
      c.selection.seed = s.value("seed", c.selection.seed);
    }
    if (j.contains("metrics")) c.metrics = j.at("metrics").get<std::vector<std::string>>();
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed experiment config: ") + e.what());
  }
  c.ddpm.validate();
  if (c.selection.n_samples < 1) throw ValidationError("selection.n_samples must be >= 1");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config " + path.string() + " is not valid JSON", e.byte);
  }
  return from_json(j);
}

ModelDescriptor ExperimentConfig::denoiser_for(const Shape& sample_shape) const {
  ModelDescriptor d = denoiser ? *denoiser : default_descriptor(ModelRole::denoiser, sample_shape);
  if (d.sample_shape != sample_shape) {
    throw CompatibilityError("denoiser descriptor does not match the data sample shape");
  }
  return d;
}

ModelDescriptor ExperimentConfig::translator_for(const Shape& sample_shape) const {
  ModelDescriptor d =
      translator ? *translator : default_descriptor(ModelRole::translator, sample_shape);
  if (d.sample_shape != sample_shape) {
    throw CompatibilityError("translator descriptor does not match the data sample shape");
  }
  return d;
}

std::string ExperimentConfig::hash() const { return io::hex64(io::fnv1a64(to_json().dump())); }

void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_file(dir / "config.resolved.json", cfg.to_json().dump(2) + "\n");
}

}  // namespace dmt
