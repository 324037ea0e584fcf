#include "spectralkan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "spectralkan/errors.hpp"

namespace spectralkan {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'A', 'N', 'C', 'K', 'P', 'T'};
constexpr int kVersion = 1;
constexpr std::uint64_t kMaxHeaderBytes = 64ULL << 20;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw IoError(IoError::Kind::MalformedHeader, path.string() + ": " + why);
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& config) {
  nlohmann::json j;
  j["variant"] = std::string(to_string(config.variant));
  j["patch_size"] = config.patch_size;
  j["bands"] = config.bands;
  j["spatial_nodes"] = config.spatial_nodes;
  j["spectral_nodes"] = config.spectral_nodes;
  j["flat_nodes"] = config.flat_nodes;
  j["spline"] = {{"degree", config.spline.degree},
                 {"grid_size", config.spline.grid_size},
                 {"domain_lo", config.spline.domain_lo},
                 {"domain_hi", config.spline.domain_hi}};
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig config;
    const auto variant = parse_variant(j.at("variant").get<std::string>());
    if (!variant) throw IoError(IoError::Kind::MalformedHeader, "unknown variant in config");
    config.variant = *variant;
    config.patch_size = j.at("patch_size").get<std::size_t>();
    config.bands = j.at("bands").get<std::size_t>();
    config.spatial_nodes = j.at("spatial_nodes").get<std::vector<std::size_t>>();
    config.spectral_nodes = j.at("spectral_nodes").get<std::vector<std::size_t>>();
    config.flat_nodes = j.at("flat_nodes").get<std::vector<std::size_t>>();
    const auto& s = j.at("spline");
    config.spline.degree = s.at("degree").get<int>();
    config.spline.grid_size = s.at("grid_size").get<int>();
    config.spline.domain_lo = s.at("domain_lo").get<double>();
    config.spline.domain_hi = s.at("domain_hi").get<double>();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoError::Kind::MalformedHeader, std::string("bad model config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& metadata) {
  nlohmann::json header;
  header["format"] = "spectralkan-checkpoint";
  header["version"] = kVersion;
  header["config"] = config_to_json(model.config());
  header["metadata"] = metadata;

  std::string payload;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    const std::uint64_t offset = payload.size();
    for (double v : p.values) put_u64(payload, std::bit_cast<std::uint64_t>(v));
    tensors.push_back({{"name", p.name},
                       {"shape", p.shape},
                       {"dtype", "f64le"},
                       {"offset", offset},
                       {"nbytes", payload.size() - offset}});
  }
  header["tensors"] = tensors;
  header["payload_bytes"] = payload.size();

  const std::string text = header.dump();
  std::string blob(kMagic, sizeof(kMagic));
  put_u64(blob, text.size());
  blob += text;
  blob += payload;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Open, "cannot open " + path.string() + " for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError(IoError::Kind::Write, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::Open, "cannot open " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < 16) throw IoError(IoError::Kind::Truncated, path.string() + ": file too short");
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) malformed(path, "bad magic");
  const std::uint64_t header_len = get_u64(blob.data() + 8);
  if (header_len > kMaxHeaderBytes)
    throw IoError(IoError::Kind::DimensionOverflow, path.string() + ": header length too large");
  if (blob.size() - 16 < header_len)
    throw IoError(IoError::Kind::Truncated, path.string() + ": header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    malformed(path, std::string("header is not JSON: ") + e.what());
  }
  if (header.value("format", "") != "spectralkan-checkpoint") malformed(path, "wrong format tag");
  if (header.value("version", 0) != kVersion) malformed(path, "unsupported version");

  Checkpoint ckpt;
  if (!header.contains("config") || !header.contains("tensors"))
    malformed(path, "header lacks config or tensor table");
  const ModelConfig config = config_from_json(header["config"]);
  try {
    ckpt.model = Model::zeros(config);
  } catch (const ContractError& e) {
    malformed(path, std::string("invalid model config: ") + e.what());
  }
  ckpt.metadata = header.value("metadata", nlohmann::json::object());

  const char* payload = blob.data() + 16 + header_len;
  const std::uint64_t payload_size = blob.size() - 16 - header_len;

  auto params = ckpt.model.parameters();
  const auto& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != params.size())
    malformed(path, "tensor table does not match the model config");
  try {
    for (std::size_t t = 0; t < params.size(); ++t) {
      const auto& entry = tensors[t];
      if (entry.at("name").get<std::string>() != params[t].name)
        malformed(path, "unexpected tensor " + entry.at("name").get<std::string>());
      if (entry.at("shape").get<std::vector<std::size_t>>() != params[t].shape)
        malformed(path, "shape mismatch for " + params[t].name);
      if (entry.at("dtype").get<std::string>() != "f64le")
        malformed(path, "unsupported dtype for " + params[t].name);
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
      if (nbytes != params[t].values.size() * 8)
        malformed(path, "byte count mismatch for " + params[t].name);
      if (offset > std::numeric_limits<std::uint64_t>::max() - nbytes)
        throw IoError(IoError::Kind::DimensionOverflow, path.string() + ": offset overflow");
      if (offset + nbytes > payload_size)
        throw IoError(IoError::Kind::Truncated,
                      path.string() + ": payload truncated in " + params[t].name);
      for (std::size_t i = 0; i < params[t].values.size(); ++i)
        params[t].values[i] = std::bit_cast<double>(get_u64(payload + offset + 8 * i));
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(path, std::string("bad tensor table: ") + e.what());
  }
  return ckpt;
}

}  // namespace spectralkan
