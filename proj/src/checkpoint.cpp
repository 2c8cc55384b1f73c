#include "dmt/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dmt/binary_io.hpp"
#include "dmt/errors.hpp"

namespace dmt {

namespace io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  const auto st = std::filesystem::status(path);
  if (std::filesystem::exists(st) && !std::filesystem::is_regular_file(st)) {
    // Devices and pipes are written in place; renaming over them would replace them.
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("write failed for " + path.string());
    return;
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace io

namespace {

constexpr std::string_view kMagic = "DMTCKPT1";
constexpr int kFormatVersion = 1;

}  // namespace

std::string encode_checkpoint(const Model& model, const CheckpointMeta& meta) {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    params.push_back({{"name", model.parameter_names()[i]},
                      {"shape", model.parameters()[i].shape()}});
  }
  const nlohmann::json header{{"format_version", kFormatVersion},
                              {"architecture", model.descriptor().to_json()},
                              {"role", to_string(model.descriptor().role)},
                              {"parameter_count", model.parameter_count()},
                              {"parameters", params},
                              {"schedule", meta.schedule},
                              {"config_hash", meta.config_hash},
                              {"optimizer", {{"kind", "adam"}, {"hyperparameters", meta.adam.to_json()}}},
                              {"extra", meta.extra}};
  const std::string text = header.dump();
  std::string out(kMagic);
  io::put_u64(out, text.size());
  out += text;
  for (const Tensor& p : model.parameters()) {
    for (double v : p.data()) io::put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (r.bytes(kMagic.size(), "magic") != kMagic) throw ParseError("not a checkpoint file", 0);
  const std::uint64_t len = r.u64("metadata length");
  const std::size_t json_at = r.offset();
  const std::string_view text = r.bytes(len, "metadata");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint metadata: ") + e.what(),
                     json_at + (e.byte > 0 ? e.byte - 1 : 0));
  }
  try {
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw CompatibilityError("unsupported checkpoint format version " +
                               header.at("format_version").dump());
    }
    ModelDescriptor desc = ModelDescriptor::from_json(header.at("architecture"));
    Model model(desc, 0);
    const nlohmann::json& params = header.at("parameters");
    if (params.size() != model.parameters().size()) {
      throw CompatibilityError("checkpoint parameter list does not match its architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].at("name").get<std::string>() != model.parameter_names()[i] ||
          params[i].at("shape").get<Shape>() != model.parameters()[i].shape()) {
        throw CompatibilityError("checkpoint parameter " + params[i].at("name").dump() +
                                 " does not match its architecture");
      }
    }
    for (Tensor& p : model.parameters()) {
      for (double& v : p.data()) v = r.f64("parameters");
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after parameters", r.offset());
    CheckpointMeta meta;
    meta.schedule = header.at("schedule");
    meta.config_hash = header.at("config_hash").get<std::string>();
    meta.adam = AdamConfig::from_json(header.at("optimizer").at("hyperparameters"));
    meta.extra = header.at("extra");
    return {std::move(model), std::move(meta)};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata is missing fields: ") + e.what(), json_at);
  }
}

void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, ModelRole expected) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.model.descriptor().role != expected) {
    throw CompatibilityError(path.string() + " holds a " + to_string(ck.model.descriptor().role) +
                             ", expected a " + to_string(expected));
  }
  return ck;
}

}  // namespace dmt
