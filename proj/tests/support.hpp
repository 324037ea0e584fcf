#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "spectralkan/data.hpp"
#include "spectralkan/layers.hpp"
#include "spectralkan/matrix.hpp"
#include "spectralkan/rng.hpp"

namespace testing {

inline spectralkan::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                         double lo = -1.0, double hi = 1.0) {
  spectralkan::Rng rng(seed);
  spectralkan::Matrix m(rows, cols);
  for (auto& v : m.values()) v = spectralkan::uniform(rng, lo, hi);
  return m;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                         double hi = 1.0) {
  spectralkan::Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = spectralkan::uniform(rng, lo, hi);
  return out;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Scalar loss sum(out .* weights) whose gradient with respect to the output
/// is `weights`.
inline double weighted_sum(const spectralkan::Matrix& out, const spectralkan::Matrix& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * weights.values()[i];
  return s;
}

inline double layer_loss(const spectralkan::Layer& layer, const spectralkan::Matrix& x,
                         const spectralkan::Matrix& weights) {
  spectralkan::LayerCache cache;
  return weighted_sum(spectralkan::forward(layer, x, cache), weights);
}

/// Fresh temporary directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("spectralkan_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Label map with the given class totals laid out row-major in class order.
inline spectralkan::LabelMap label_map_with_counts(std::size_t unchanged, std::size_t changed,
                                                   std::size_t unknown, std::size_t width) {
  const std::size_t total = unchanged + changed + unknown;
  const std::size_t height = (total + width - 1) / width;
  spectralkan::LabelMap map(height, width, spectralkan::LabelMap::kUnknown);
  std::size_t k = 0;
  for (std::size_t i = 0; i < unchanged; ++i) map.labels[k++] = spectralkan::LabelMap::kUnchanged;
  for (std::size_t i = 0; i < changed; ++i) map.labels[k++] = spectralkan::LabelMap::kChanged;
  return map;
}

}  // namespace testing
