#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include <json.hpp>

#include "spectralkan/data.hpp"
#include "spectralkan/errors.hpp"

namespace spectralkan {

namespace {

// Refuse payloads beyond 64 GiB; also catches size_t overflow of h * w * b.
constexpr std::uint64_t kMaxPayloadBytes = 64ULL << 30;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::Open, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::Open, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoError::Kind::Write, "failed writing " + path.string());
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw IoError(IoError::Kind::MalformedHeader, path.string() + ": " + why);
}

std::uint64_t positive_dim(const nlohmann::json& header, const char* key,
                           const std::filesystem::path& path) {
  if (!header.contains(key)) malformed(path, std::string("missing field \"") + key + "\"");
  const auto& v = header[key];
  if (!v.is_number_integer()) malformed(path, std::string("field \"") + key + "\" is not an integer");
  if (v.is_number_unsigned()) {
    const auto n = v.get<std::uint64_t>();
    if (n == 0) malformed(path, std::string("field \"") + key + "\" must be positive");
    return n;
  }
  const auto n = v.get<std::int64_t>();
  if (n <= 0) malformed(path, std::string("field \"") + key + "\" must be positive");
  return static_cast<std::uint64_t>(n);
}

}  // namespace

std::filesystem::path payload_path(const std::filesystem::path& header_path) {
  auto p = header_path;
  p.replace_extension(".raw");
  return p;
}

void save_cube(const std::filesystem::path& header_path, const HsiCube& cube) {
  nlohmann::ordered_json header;
  header["height"] = cube.height();
  header["width"] = cube.width();
  header["bands"] = cube.bands();
  header["dtype"] = "f32le";
  header["order"] = "band-interleaved-by-pixel";

  std::string payload;
  payload.reserve(cube.values().size() * 4);
  for (float v : cube.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  write_file(header_path, header.dump(2) + "\n");
  write_file(payload_path(header_path), payload);
}

HsiCube load_cube(const std::filesystem::path& header_path) {
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_file(header_path));
  } catch (const nlohmann::json::exception& e) {
    malformed(header_path, std::string("header is not JSON: ") + e.what());
  }
  if (!header.is_object()) malformed(header_path, "header is not a JSON object");
  const std::uint64_t h = positive_dim(header, "height", header_path);
  const std::uint64_t w = positive_dim(header, "width", header_path);
  const std::uint64_t b = positive_dim(header, "bands", header_path);
  if (header.value("dtype", "") != "f32le") malformed(header_path, "dtype must be \"f32le\"");
  if (header.value("order", "") != "band-interleaved-by-pixel")
    malformed(header_path, "order must be \"band-interleaved-by-pixel\"");

  const std::uint64_t limit = kMaxPayloadBytes / 4;
  if (h > limit || w > limit / h || b > limit / (h * w))
    throw IoError(IoError::Kind::DimensionOverflow,
                  header_path.string() + ": declared dimensions exceed the supported size");
  const std::uint64_t count = h * w * b;

  const auto raw = payload_path(header_path);
  const std::string payload = read_file(raw);
  if (payload.size() < count * 4)
    throw IoError(IoError::Kind::Truncated,
                  raw.string() + ": payload has " + std::to_string(payload.size()) +
                      " bytes, header declares " + std::to_string(count * 4));
  if (payload.size() > count * 4)
    malformed(raw, "payload is larger than the header declares");

  std::vector<float> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * i + k])) << (8 * k);
    values[i] = std::bit_cast<float>(bits);
    if (!std::isfinite(values[i]))
      throw IoError(IoError::Kind::InvalidValue,
                    raw.string() + ": non-finite value at index " + std::to_string(i));
  }
  return HsiCube(h, w, b, std::move(values));
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height) throw ContractError("PGM pixel count mismatch");
  std::string bytes = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  bytes.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  write_file(path, bytes);
}

LabelMap read_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;

  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) -> std::uint64_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      malformed(path, std::string("expected ") + what);
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::uint64_t>(bytes[pos] - '0');
      if (v > (1ULL << 32))
        throw IoError(IoError::Kind::DimensionOverflow, path.string() + ": " + what + " too large");
      ++pos;
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') malformed(path, "not a binary PGM");
  pos = 2;
  const std::uint64_t w = read_uint("width");
  const std::uint64_t h = read_uint("height");
  const std::uint64_t maxval = read_uint("maxval");
  if (w == 0 || h == 0) malformed(path, "PGM dimensions must be positive");
  if (maxval != 255) malformed(path, "PGM maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    malformed(path, "missing separator after PGM header");
  ++pos;
  if (bytes.size() - pos < w * h)
    throw IoError(IoError::Kind::Truncated, path.string() + ": PGM raster truncated");

  LabelMap map(h, w);
  std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), w * h,
              map.labels.begin());
  return map;
}

void save_label_map(const std::filesystem::path& path, const LabelMap& labels) {
  write_pgm(path, labels.width, labels.height, labels.labels);
}

LabelMap load_label_map(const std::filesystem::path& path) {
  LabelMap map = read_pgm(path);
  for (std::uint8_t v : map.labels)
    if (v != LabelMap::kUnchanged && v != LabelMap::kChanged && v != LabelMap::kUnknown)
      throw IoError(IoError::Kind::InvalidValue,
                    path.string() + ": label value " + std::to_string(v) +
                        " is not 0, 1 or 255");
  return map;
}

}  // namespace spectralkan
