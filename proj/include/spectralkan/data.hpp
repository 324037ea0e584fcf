#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace spectralkan {

/// h x w x b raster, band-interleaved-by-pixel (band fastest).
class HsiCube {
 public:
  HsiCube() = default;
  /// Throws ContractError for zero dimensions.
  HsiCube(std::size_t height, std::size_t width, std::size_t bands, float fill = 0.0f);
  /// Throws ContractError if the value count does not match or a value is
  /// not finite.
  HsiCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<float> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bands() const noexcept { return bands_; }

  float& at(std::size_t row, std::size_t col, std::size_t band) {
    return values_[(row * width_ + col) * bands_ + band];
  }
  float at(std::size_t row, std::size_t col, std::size_t band) const {
    return values_[(row * width_ + col) * bands_ + band];
  }
  std::span<const float> pixel(std::size_t row, std::size_t col) const {
    return {values_.data() + (row * width_ + col) * bands_, bands_};
  }
  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }

  bool operator==(const HsiCube&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t bands_ = 0;
  std::vector<float> values_;
};

/// Ground truth: 0 = unchanged, 1 = changed, 255 = unknown.
struct LabelMap {
  static constexpr std::uint8_t kUnchanged = 0;
  static constexpr std::uint8_t kChanged = 1;
  static constexpr std::uint8_t kUnknown = 255;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = kUnchanged)
      : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t& at(std::size_t row, std::size_t col) { return labels[row * width + col]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return labels[row * width + col]; }

  bool operator==(const LabelMap&) const = default;
};

struct PixelCoord {
  std::size_t row = 0;
  std::size_t col = 0;
  auto operator<=>(const PixelCoord&) const = default;
};

struct SplitSpec {
  std::vector<PixelCoord> train;
  std::vector<PixelCoord> test;
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

/// n patches of p x p x b values (row, col, band; band fastest) plus labels.
struct PatchSet {
  std::size_t patch_size = 0;
  std::size_t bands = 0;
  std::vector<double> patches;
  std::vector<std::uint8_t> labels;
  std::vector<PixelCoord> coords;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t patch_values() const noexcept { return patch_size * patch_size * bands; }
  std::span<const double> patch(std::size_t n) const {
    return {patches.data() + n * patch_values(), patch_values()};
  }
};

/// Elementwise x1 - x2. Throws ContractError on dimension mismatch.
HsiCube difference(const HsiCube& x1, const HsiCube& x2);

/// Per-band affine map of [min, max] onto [-1, 1]; constant bands become 0.
HsiCube normalize(const HsiCube& cube);

/// Mirror index for position i on an axis of length n, reflecting about the
/// edge samples without repeating them (-1 -> 1, n -> n - 2).
std::size_t mirror_index(std::ptrdiff_t i, std::size_t n);

/// p x p x b window centered on (row, col) with mirror-reflected borders.
/// Throws ContractError for even p or an out-of-range center.
std::vector<double> extract_patch(const HsiCube& cube, std::size_t row, std::size_t col,
                                  std::size_t p);
void extract_patch_into(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t p,
                        std::span<double> out);

/// Patches and labels for the given coordinates. Unknown labels are kept as
/// 255 so that callers can predict every pixel.
PatchSet make_patches(const HsiCube& cube, const LabelMap& labels,
                      std::span<const PixelCoord> coords, std::size_t p);

/// Per class, floor(fraction * count) pixels are drawn for training without
/// replacement; the remaining known pixels form the test set. Unknown pixels
/// appear in neither. Throws ContractError when a class is empty or would
/// receive no training pixels, or fraction is outside (0, 1).
SplitSpec stratified_split(const LabelMap& labels, double fraction, std::uint64_t seed);

/// floor(fraction * count) with a tolerance for binary rounding of fraction.
std::size_t train_count(double fraction, std::size_t count);

struct SyntheticScene {
  HsiCube before;
  HsiCube after;
  LabelMap labels;
};

/// Bi-temporal scene of smooth per-class spectra plus Gaussian noise. Changed
/// pixels form disk-shaped blobs covering about `change_fraction` of the
/// image and receive a different second-epoch spectrum.
SyntheticScene synth_dataset(std::size_t height, std::size_t width, std::size_t bands,
                             double change_fraction, double noise_sigma, std::uint64_t seed);

/// Cube on disk: JSON header at `header_path` and raw f32 little-endian
/// payload next to it with the extension replaced by ".raw".
std::filesystem::path payload_path(const std::filesystem::path& header_path);
void save_cube(const std::filesystem::path& header_path, const HsiCube& cube);
HsiCube load_cube(const std::filesystem::path& header_path);

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels);
LabelMap read_pgm(const std::filesystem::path& path);

void save_label_map(const std::filesystem::path& path, const LabelMap& labels);
/// read_pgm plus a check that every value is 0, 1 or 255.
LabelMap load_label_map(const std::filesystem::path& path);

}  // namespace spectralkan
