#include "spectralkan/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "spectralkan/errors.hpp"
#include "spectralkan/rng.hpp"

namespace spectralkan {

HsiCube::HsiCube(std::size_t height, std::size_t width, std::size_t bands, float fill)
    : height_(height), width_(width), bands_(bands) {
  if (height == 0 || width == 0 || bands == 0)
    throw ContractError("cube dimensions must be positive");
  values_.assign(height * width * bands, fill);
}

HsiCube::HsiCube(std::size_t height, std::size_t width, std::size_t bands,
                 std::vector<float> values)
    : height_(height), width_(width), bands_(bands), values_(std::move(values)) {
  if (height == 0 || width == 0 || bands == 0)
    throw ContractError("cube dimensions must be positive");
  if (values_.size() != height * width * bands)
    throw ContractError("cube value count does not match its dimensions");
  for (float v : values_)
    if (!std::isfinite(v)) throw ContractError("cube contains a non-finite value");
}

HsiCube difference(const HsiCube& x1, const HsiCube& x2) {
  if (x1.height() != x2.height() || x1.width() != x2.width() || x1.bands() != x2.bands())
    throw ContractError("difference needs cubes of identical dimensions");
  HsiCube out(x1.height(), x1.width(), x1.bands());
  const auto a = x1.values();
  const auto b = x2.values();
  auto d = out.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return out;
}

HsiCube normalize(const HsiCube& cube) {
  const std::size_t bands = cube.bands();
  std::vector<double> lo(bands, std::numeric_limits<double>::infinity());
  std::vector<double> hi(bands, -std::numeric_limits<double>::infinity());
  const auto v = cube.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t b = i % bands;
    lo[b] = std::min(lo[b], static_cast<double>(v[i]));
    hi[b] = std::max(hi[b], static_cast<double>(v[i]));
  }
  HsiCube out(cube.height(), cube.width(), bands);
  auto o = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t b = i % bands;
    const double range = hi[b] - lo[b];
    o[i] = range > 0.0 ? static_cast<float>(2.0 * (v[i] - lo[b]) / range - 1.0) : 0.0f;
  }
  return out;
}

std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - m);
}

void extract_patch_into(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t p,
                        std::span<double> out) {
  if (p == 0 || p % 2 == 0) throw ContractError("patch size must be odd and positive");
  if (row >= cube.height() || col >= cube.width())
    throw ContractError("patch center lies outside the cube");
  const std::size_t bands = cube.bands();
  if (out.size() != p * p * bands) throw ContractError("patch buffer has wrong length");
  const auto half = static_cast<std::ptrdiff_t>(p / 2);
  std::size_t k = 0;
  for (std::ptrdiff_t dr = -half; dr <= half; ++dr) {
    const std::size_t r = mirror_index(static_cast<std::ptrdiff_t>(row) + dr, cube.height());
    for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
      const std::size_t c = mirror_index(static_cast<std::ptrdiff_t>(col) + dc, cube.width());
      for (float v : cube.pixel(r, c)) out[k++] = v;
    }
  }
}

std::vector<double> extract_patch(const HsiCube& cube, std::size_t row, std::size_t col,
                                  std::size_t p) {
  if (p == 0 || p % 2 == 0) throw ContractError("patch size must be odd and positive");
  std::vector<double> out(p * p * cube.bands());
  extract_patch_into(cube, row, col, p, out);
  return out;
}

PatchSet make_patches(const HsiCube& cube, const LabelMap& labels,
                      std::span<const PixelCoord> coords, std::size_t p) {
  if (labels.height != cube.height() || labels.width != cube.width())
    throw ContractError("label map and cube dimensions differ");
  PatchSet set;
  set.patch_size = p;
  set.bands = cube.bands();
  set.patches.resize(coords.size() * set.patch_values());
  set.labels.reserve(coords.size());
  set.coords.assign(coords.begin(), coords.end());
  for (std::size_t n = 0; n < coords.size(); ++n) {
    extract_patch_into(cube, coords[n].row, coords[n].col, p,
                       std::span<double>(set.patches).subspan(n * set.patch_values(),
                                                              set.patch_values()));
    set.labels.push_back(labels.at(coords[n].row, coords[n].col));
  }
  return set;
}

std::size_t train_count(double fraction, std::size_t count) {
  // 0.01 * 44723 must floor to 447 even though 0.01 is not exact in binary.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count) + 1e-9));
}

SplitSpec stratified_split(const LabelMap& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ContractError("training fraction must lie in (0, 1)");
  if (labels.labels.size() != labels.height * labels.width)
    throw ContractError("label map storage does not match its dimensions");

  std::vector<PixelCoord> by_class[2];
  for (std::size_t r = 0; r < labels.height; ++r)
    for (std::size_t c = 0; c < labels.width; ++c) {
      const std::uint8_t l = labels.at(r, c);
      if (l == LabelMap::kUnchanged || l == LabelMap::kChanged) by_class[l].push_back({r, c});
    }

  SplitSpec split;
  split.fraction = fraction;
  split.seed = seed;
  for (std::size_t cls = 0; cls < 2; ++cls) {
    auto& pixels = by_class[cls];
    const char* name = cls == 0 ? "unchanged" : "changed";
    if (pixels.empty()) throw ContractError(std::string("no ") + name + " pixels to split");
    const std::size_t n_train = train_count(fraction, pixels.size());
    if (n_train == 0)
      throw ContractError(std::string("fraction leaves no training pixels for class ") + name +
                          " (" + std::to_string(pixels.size()) + " pixels)");
    Rng rng(derive_seed(seed, cls));
    shuffle(pixels.begin(), pixels.end(), rng);
    split.train.insert(split.train.end(), pixels.begin(), pixels.begin() + n_train);
    split.test.insert(split.test.end(), pixels.begin() + n_train, pixels.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ------------------------------------------------------------------ synthetic

namespace {

constexpr std::size_t kLandCoverClasses = 4;
constexpr std::size_t kRegionSeeds = 8;
// Minimum RMS distance between the change material and every land cover.
constexpr double kChangeContrast = 0.3;
constexpr int kChangeDraws = 256;

// Smooth reflectance-like curve: a slow sinusoid plus two Gaussian bumps.
std::vector<double> make_signature(std::size_t bands, Rng& rng) {
  const double base = uniform(rng, 0.3, 0.7);
  const double amp = uniform(rng, 0.1, 0.25);
  const double freq = uniform(rng, 0.5, 2.0);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  double centers[2];
  double heights[2];
  for (int k = 0; k < 2; ++k) {
    centers[k] = uniform01(rng);
    heights[k] = uniform(rng, -0.3, 0.3);
  }
  std::vector<double> sig(bands);
  for (std::size_t b = 0; b < bands; ++b) {
    const double t = bands > 1 ? static_cast<double>(b) / static_cast<double>(bands - 1) : 0.5;
    double v = base + amp * std::sin(2.0 * std::numbers::pi * freq * t + phase);
    for (int k = 0; k < 2; ++k) {
      const double d = (t - centers[k]) / 0.15;
      v += heights[k] * std::exp(-0.5 * d * d);
    }
    sig[b] = v;
  }
  return sig;
}

double rms_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum / static_cast<double>(a.size()));
}

std::vector<double> make_change_signature(std::size_t bands,
                                          const std::vector<std::vector<double>>& covers,
                                          Rng& rng) {
  std::vector<double> best;
  double best_contrast = -1.0;
  for (int draw = 0; draw < kChangeDraws && best_contrast < kChangeContrast; ++draw) {
    auto sig = make_signature(bands, rng);
    double contrast = std::numeric_limits<double>::infinity();
    for (const auto& c : covers) contrast = std::min(contrast, rms_distance(sig, c));
    if (contrast > best_contrast) {
      best_contrast = contrast;
      best = std::move(sig);
    }
  }
  return best;
}

}  // namespace

SyntheticScene synth_dataset(std::size_t height, std::size_t width, std::size_t bands,
                             double change_fraction, double noise_sigma, std::uint64_t seed) {
  if (height == 0 || width == 0 || bands == 0)
    throw ContractError("synthetic scene dimensions must be positive");
  if (!(change_fraction >= 0.0 && change_fraction <= 1.0))
    throw ContractError("change fraction must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw ContractError("noise sigma must be non-negative");

  // Four land covers; every changed pixel turns into one new material.
  Rng sig_rng(derive_seed(seed, 0));
  std::vector<std::vector<double>> cover_sig(kLandCoverClasses);
  for (auto& s : cover_sig) s = make_signature(bands, sig_rng);
  const std::vector<double> changed_sig = make_change_signature(bands, cover_sig, sig_rng);

  // Land cover: nearest of a few random region seeds.
  Rng map_rng(derive_seed(seed, 1));
  std::vector<std::pair<double, double>> region_seeds(kRegionSeeds);
  for (auto& [r, c] : region_seeds) {
    r = uniform(map_rng, 0.0, static_cast<double>(height));
    c = uniform(map_rng, 0.0, static_cast<double>(width));
  }
  std::vector<std::size_t> cover(height * width);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < kRegionSeeds; ++s) {
        const double dr = region_seeds[s].first - static_cast<double>(r);
        const double dc = region_seeds[s].second - static_cast<double>(c);
        const double d = dr * dr + dc * dc;
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      cover[r * width + c] = best % kLandCoverClasses;
    }

  // Changed blobs: disks dropped until the target share is reached.
  LabelMap labels(height, width, LabelMap::kUnchanged);
  const auto target = static_cast<std::size_t>(
      std::llround(change_fraction * static_cast<double>(height * width)));
  const double short_side = static_cast<double>(std::min(height, width));
  std::size_t changed = 0;
  while (changed < target) {
    const double cr = uniform(map_rng, 0.0, static_cast<double>(height));
    const double cc = uniform(map_rng, 0.0, static_cast<double>(width));
    const double radius = std::max(1.0, uniform(map_rng, 0.15, 0.30) * short_side);
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const double dr = static_cast<double>(r) + 0.5 - cr;
        const double dc = static_cast<double>(c) + 0.5 - cc;
        if (dr * dr + dc * dc <= radius * radius && labels.at(r, c) == LabelMap::kUnchanged) {
          labels.at(r, c) = LabelMap::kChanged;
          ++changed;
        }
      }
  }

  HsiCube before(height, width, bands);
  HsiCube after(height, width, bands);
  Rng noise_rng(derive_seed(seed, 2));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t cls = cover[r * width + c];
      const bool is_changed = labels.at(r, c) == LabelMap::kChanged;
      const auto& sig1 = cover_sig[cls];
      const auto& sig2 = is_changed ? changed_sig : cover_sig[cls];
      for (std::size_t b = 0; b < bands; ++b) {
        const double n1 = noise_sigma > 0.0 ? noise_sigma * noise(noise_rng) : 0.0;
        const double n2 = noise_sigma > 0.0 ? noise_sigma * noise(noise_rng) : 0.0;
        before.at(r, c, b) = static_cast<float>(sig1[b] + n1);
        after.at(r, c, b) = static_cast<float>(sig2[b] + n2);
      }
    }
  return {std::move(before), std::move(after), std::move(labels)};
}

}  // namespace spectralkan
