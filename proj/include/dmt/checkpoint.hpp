#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dmt/adam.hpp"
#include "dmt/models.hpp"

namespace dmt {

struct CheckpointMeta {
  nlohmann::json schedule;
  std::string config_hash;
  AdamConfig adam;
  /// Free-form training facts (e.g. the translation timesteps).
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
};

/// "DMTCKPT1", u64 LE metadata length, metadata JSON, then every parameter as
/// LE f64 in descriptor order.
std::string encode_checkpoint(const Model& model, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above, but a model of another role raises CompatibilityError.
Checkpoint load_checkpoint(const std::filesystem::path& path, ModelRole expected);

}  // namespace dmt
