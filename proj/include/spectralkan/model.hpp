#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spectralkan/layers.hpp"
#include "spectralkan/matrix.hpp"
#include "spectralkan/spline.hpp"

namespace spectralkan {

/// The full model and the five ablation variants.
enum class Variant { Mlp, MlpSs, Kan, KanEnc, KanSs, SpectralKan };

/// CLI names: mlp, mlp-ss, kan, kan-enc, kan-ss, spectral-kan.
std::string_view to_string(Variant variant);
std::optional<Variant> parse_variant(std::string_view name);

/// Whether the variant splits the patch into a spatial and a spectral stack.
bool is_spatial_spectral(Variant variant);

/// Layer kind every layer of the variant is built from.
LayerKind layer_kind(Variant variant);

struct SplineSettings {
  int degree = 3;
  int grid_size = 5;
  double domain_lo = -1.0;
  double domain_hi = 1.0;

  SplineGrid grid() const { return SplineGrid(degree, grid_size, domain_lo, domain_hi); }
  bool operator==(const SplineSettings&) const = default;
};

struct ModelConfig {
  Variant variant = Variant::SpectralKan;
  std::size_t patch_size = 5;
  std::size_t bands = 1;
  /// Spatial-spectral variants: p^2 -> ... -> 1, shared across bands.
  std::vector<std::size_t> spatial_nodes;
  /// Spatial-spectral variants: b -> ... -> 2.
  std::vector<std::size_t> spectral_nodes;
  /// Flat variants: p^2 * b -> ... -> 2.
  std::vector<std::size_t> flat_nodes;
  SplineSettings spline;

  /// Spatial [p^2, 16, 1] and spectral [b, 16, 2]; flat [p^2 b, 16, 2].
  static ModelConfig standard(Variant variant, std::size_t bands, std::size_t patch_size = 5);

  std::size_t patch_pixels() const { return patch_size * patch_size; }
  std::size_t patch_values() const { return patch_pixels() * bands; }

  /// Throws ContractError when a node list does not fit the variant and dims.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Named view of one parameter tensor, e.g. "spatial.0.w_a".
struct NamedParam {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
};

struct ConstNamedParam {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> values;
};

/// Per-layer caches of one forward pass, needed by Model::backward.
struct ForwardTrace {
  std::size_t batch = 0;
  Matrix logits;
  std::vector<LayerCache> spatial;
  std::vector<LayerCache> head;
};

class Model {
 public:
  /// Empty model with no layers; forward() rejects it.
  Model() = default;

  /// Builds the variant with Kaiming-uniform parameters; layer l of each
  /// stack is seeded from (seed, stack, l).
  static Model build(const ModelConfig& config, std::uint64_t seed);

  /// Builds the variant with every parameter set to zero.
  static Model zeros(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  bool empty() const noexcept { return spatial_.empty() && head_.empty(); }

  /// Spatial stack of spatial-spectral variants; empty for flat variants.
  const std::vector<Layer>& spatial_stack() const noexcept { return spatial_; }
  std::vector<Layer>& spatial_stack() noexcept { return spatial_; }
  /// Spectral stack (spatial-spectral variants) or the single flat stack.
  const std::vector<Layer>& head_stack() const noexcept { return head_; }
  std::vector<Layer>& head_stack() noexcept { return head_; }

  /// Logits (batch x 2) for patches laid out batch x p x p x b, band fastest.
  Matrix forward(std::span<const double> patches, std::size_t batch) const;

  /// Spatial encoder output z (batch x b); spatial-spectral variants only.
  Matrix spatial_features(std::span<const double> patches, std::size_t batch) const;

  ForwardTrace forward_trace(std::span<const double> patches, std::size_t batch) const;

  /// Parameter gradients in parameters() order.
  std::vector<std::vector<double>> backward(const ForwardTrace& trace,
                                            const Matrix& grad_logits) const;

  std::vector<NamedParam> parameters();
  std::vector<ConstNamedParam> parameters() const;

  std::uint64_t total_params() const;
  /// Per patch; spatial-layer FLOPs are counted once per band.
  std::uint64_t total_flops() const;

 private:
  Matrix to_band_rows(std::span<const double> patches, std::size_t batch) const;

  ModelConfig config_;
  std::vector<Layer> spatial_;
  std::vector<Layer> head_;
};

}  // namespace spectralkan
