#pragma once

#include <filesystem>

#include <json.hpp>

#include "spectralkan/model.hpp"

namespace spectralkan {

/// Checkpoint container:
///
///   bytes 0..7    magic "SKANCKPT"
///   bytes 8..15   header length H, uint64 little-endian
///   next H bytes  UTF-8 JSON header: format, version, config, metadata and a
///                 tensor table {name, shape, dtype "f64le", offset, nbytes}
///   remainder     payload; tensor offsets are relative to its first byte
///
/// Parameters are stored as IEEE-754 binary64 little-endian, so a save/load
/// round trip is bit-exact.
struct Checkpoint {
  Model model;
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json config_to_json(const ModelConfig& config);
/// Throws IoError(MalformedHeader) for missing or ill-typed fields.
ModelConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& metadata = nlohmann::json::object());

/// Throws IoError with Kind::Open, MalformedHeader, Truncated or
/// DimensionOverflow.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spectralkan
