#pragma once

#include <array>
#include <cstdint>
#include <span>

#include <json.hpp>

#include "spectralkan/data.hpp"

namespace spectralkan {

/// 2 x 2 tally, rows = truth, columns = prediction (0 unchanged, 1 changed).
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};

  std::uint64_t total() const noexcept {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
  void add(std::uint8_t truth, std::uint8_t prediction) { ++counts[truth][prediction]; }

  /// Matrices of disjoint pixel sets merge by elementwise sum.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Tallies every pixel whose truth is not 255. `predictions` is row-major
/// with the label map's dimensions and holds 0/1 at evaluated pixels.
ConfusionMatrix accumulate(std::span<const std::uint8_t> predictions, const LabelMap& truth);

/// trace / total. Throws UndefinedMetricError on an empty matrix.
double overall_accuracy(const ConfusionMatrix& cm);

/// Cohen's kappa (p_o - p_e) / (1 - p_e); 0 when p_e == 1. Throws
/// UndefinedMetricError on an empty matrix.
double kappa(const ConfusionMatrix& cm);

/// {oa, kappa, confusion: [[..],[..]], evaluated_pixels}
nlohmann::json metrics_report(const ConfusionMatrix& cm);

}  // namespace spectralkan
