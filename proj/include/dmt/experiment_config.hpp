#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmt/ddpm_train.hpp"
#include "dmt/dmt.hpp"
#include "dmt/models.hpp"
#include "dmt/schedule.hpp"
#include "dmt/timestep_select.hpp"

namespace dmt {

struct SelectionConfig {
  CurveMetric metric = CurveMetric::ssim;
  std::size_t n_samples = 64;
  /// Spacing of the sampled timesteps (0 means T / 40, at least 1).
  int step = 0;
  std::uint64_t seed = 0;

  std::vector<int> timesteps(int T) const;
};

/// One JSON file drives every command; absent keys take the defaults below.
///   {
///     "dataset":   {"generator": "shapes", "n": 512, "seed": 0, ...},
///     "schedule":  {"kind": "linear", "T": 200, "beta_start": 5e-4, "beta_end": 0.1},
///     "denoiser":  <model descriptor> | null,   null -> default for the data
///     "translator":<model descriptor> | null,
///     "ddpm":      {"epochs", "batch_size", "seed", "adam"},
///     "dmt":       {"t": <int> | "auto", "s", "weighting", "epochs", ...},
///     "selection": {"metric", "n_samples", "step", "seed"},
///     "metrics":   ["ssim", "psnr", "l1", "l2", "toyfid"],
///     "seed": 0
///   }
struct ExperimentConfig {
  nlohmann::json dataset = nlohmann::json::object();
  NoiseSchedule schedule = scaled_linear_schedule(200);
  std::optional<ModelDescriptor> denoiser;
  std::optional<ModelDescriptor> translator;
  TrainConfig ddpm;
  DmtConfig dmt;
  bool t_auto = false;
  SelectionConfig selection;
  std::vector<std::string> metrics{"ssim", "psnr", "l1", "l2", "toyfid"};
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  ModelDescriptor denoiser_for(const Shape& sample_shape) const;
  ModelDescriptor translator_for(const Shape& sample_shape) const;

  /// FNV-1a of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

/// Writes `<dir>/config.resolved.json` (the canonical dump).
void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace dmt
