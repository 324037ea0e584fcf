#include "spectralkan/model.hpp"

#include <array>
#include <string>
#include <utility>

#include "spectralkan/errors.hpp"
#include "spectralkan/rng.hpp"

namespace spectralkan {

namespace {

struct VariantName {
  Variant variant;
  std::string_view name;
};

constexpr std::array<VariantName, 6> kVariantNames{{
    {Variant::Mlp, "mlp"},
    {Variant::MlpSs, "mlp-ss"},
    {Variant::Kan, "kan"},
    {Variant::KanEnc, "kan-enc"},
    {Variant::KanSs, "kan-ss"},
    {Variant::SpectralKan, "spectral-kan"},
}};

std::string join(const std::vector<std::size_t>& nodes) {
  std::string out = "[";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(nodes[i]);
  }
  return out + "]";
}

void check_nodes(const std::vector<std::size_t>& nodes, std::size_t first, std::size_t last,
                 std::string_view what) {
  const std::string label(what);
  if (nodes.size() < 2) throw ContractError(label + " node list needs at least two entries");
  for (std::size_t n : nodes)
    if (n == 0) throw ContractError(label + " node list contains a zero width: " + join(nodes));
  if (nodes.front() != first)
    throw ContractError(label + " node list " + join(nodes) + " must start with " +
                        std::to_string(first));
  if (nodes.back() != last)
    throw ContractError(label + " node list " + join(nodes) + " must end with " +
                        std::to_string(last));
}

std::vector<Layer> build_stack(const std::vector<std::size_t>& nodes, LayerKind kind,
                               const SplineGrid& grid, std::uint64_t seed,
                               std::uint64_t stack_index, bool activate_last) {
  std::vector<Layer> layers;
  layers.reserve(nodes.size() - 1);
  for (std::size_t l = 0; l + 1 < nodes.size(); ++l) {
    const bool last = l + 2 == nodes.size();
    const std::uint64_t layer_seed = derive_seed(derive_seed(seed, stack_index), l);
    layers.push_back(
        init_params(kind, nodes[l], nodes[l + 1], grid, layer_seed, !last || activate_last));
  }
  return layers;
}

Matrix run_stack(const std::vector<Layer>& stack, Matrix x, std::vector<LayerCache>* caches) {
  LayerCache scratch;
  for (std::size_t l = 0; l < stack.size(); ++l) {
    LayerCache& cache = caches ? (*caches)[l] : scratch;
    x = forward(stack[l], x, cache);
  }
  return x;
}

// Walks a stack backwards, appending parameter gradients per layer in
// forward order, and returns the gradient with respect to the stack input.
Matrix backprop_stack(const std::vector<Layer>& stack, const std::vector<LayerCache>& caches,
                      Matrix grad, std::vector<std::vector<std::vector<double>>>& per_layer) {
  per_layer.resize(stack.size());
  for (std::size_t l = stack.size(); l-- > 0;) {
    LayerGradients g = backward(stack[l], caches[l], grad);
    per_layer[l] = std::move(g.params);
    grad = std::move(g.input);
  }
  return grad;
}

}  // namespace

std::string_view to_string(Variant variant) {
  for (const auto& entry : kVariantNames)
    if (entry.variant == variant) return entry.name;
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (const auto& entry : kVariantNames)
    if (entry.name == name) return entry.variant;
  return std::nullopt;
}

bool is_spatial_spectral(Variant variant) {
  return variant == Variant::MlpSs || variant == Variant::KanSs ||
         variant == Variant::SpectralKan;
}

LayerKind layer_kind(Variant variant) {
  switch (variant) {
    case Variant::Mlp:
    case Variant::MlpSs: return LayerKind::Dense;
    case Variant::Kan:
    case Variant::KanSs: return LayerKind::FullKan;
    case Variant::KanEnc:
    case Variant::SpectralKan: return LayerKind::SharedKan;
  }
  throw ContractError("unknown variant");
}

ModelConfig ModelConfig::standard(Variant variant, std::size_t bands, std::size_t patch_size) {
  ModelConfig config;
  config.variant = variant;
  config.patch_size = patch_size;
  config.bands = bands;
  if (is_spatial_spectral(variant)) {
    config.spatial_nodes = {patch_size * patch_size, 16, 1};
    config.spectral_nodes = {bands, 16, 2};
  } else {
    config.flat_nodes = {patch_size * patch_size * bands, 16, 2};
  }
  return config;
}

void ModelConfig::validate() const {
  if (patch_size == 0 || patch_size % 2 == 0)
    throw ContractError("patch size must be odd and positive, got " + std::to_string(patch_size));
  if (bands == 0) throw ContractError("band count must be positive");
  // Constructing the grid validates the spline settings.
  (void)spline.grid();
  if (is_spatial_spectral(variant)) {
    check_nodes(spatial_nodes, patch_pixels(), 1, "spatial");
    check_nodes(spectral_nodes, bands, 2, "spectral");
    if (!flat_nodes.empty())
      throw ContractError("flat node list is not used by spatial-spectral variants");
  } else {
    check_nodes(flat_nodes, patch_values(), 2, "flat");
    if (!spatial_nodes.empty() || !spectral_nodes.empty())
      throw ContractError("spatial/spectral node lists are not used by flat variants");
  }
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model;
  model.config_ = config;
  const LayerKind kind = layer_kind(config.variant);
  const SplineGrid grid = config.spline.grid();
  if (is_spatial_spectral(config.variant)) {
    model.spatial_ = build_stack(config.spatial_nodes, kind, grid, seed, 0, true);
    model.head_ = build_stack(config.spectral_nodes, kind, grid, seed, 1, false);
  } else {
    model.head_ = build_stack(config.flat_nodes, kind, grid, seed, 1, false);
  }
  return model;
}

Model Model::zeros(const ModelConfig& config) {
  Model model = build(config, 0);
  for (auto& p : model.parameters()) std::fill(p.values.begin(), p.values.end(), 0.0);
  return model;
}

Matrix Model::to_band_rows(std::span<const double> patches, std::size_t batch) const {
  const std::size_t pixels = config_.patch_pixels();
  const std::size_t bands = config_.bands;
  Matrix rows(batch * bands, pixels);
  for (std::size_t n = 0; n < batch; ++n) {
    const double* patch = patches.data() + n * pixels * bands;
    for (std::size_t px = 0; px < pixels; ++px)
      for (std::size_t band = 0; band < bands; ++band)
        rows(n * bands + band, px) = patch[px * bands + band];
  }
  return rows;
}

ForwardTrace Model::forward_trace(std::span<const double> patches, std::size_t batch) const {
  if (empty()) throw ContractError("model has no layers");
  if (patches.size() != batch * config_.patch_values())
    throw ContractError("patch buffer holds " + std::to_string(patches.size()) +
                        " values, expected " + std::to_string(batch * config_.patch_values()));
  ForwardTrace trace;
  trace.batch = batch;
  trace.spatial.resize(spatial_.size());
  trace.head.resize(head_.size());

  Matrix head_input;
  if (is_spatial_spectral(config_.variant)) {
    Matrix z = run_stack(spatial_, to_band_rows(patches, batch), &trace.spatial);
    head_input = z.reshaped(batch, config_.bands);
  } else {
    head_input = Matrix(batch, config_.patch_values(),
                        std::vector<double>(patches.begin(), patches.end()));
  }
  trace.logits = run_stack(head_, std::move(head_input), &trace.head);
  return trace;
}

Matrix Model::forward(std::span<const double> patches, std::size_t batch) const {
  return forward_trace(patches, batch).logits;
}

Matrix Model::spatial_features(std::span<const double> patches, std::size_t batch) const {
  if (!is_spatial_spectral(config_.variant))
    throw ContractError("flat variants have no spatial encoder");
  if (patches.size() != batch * config_.patch_values())
    throw ContractError("patch buffer size does not match batch");
  return run_stack(spatial_, to_band_rows(patches, batch), nullptr).reshaped(batch, config_.bands);
}

std::vector<std::vector<double>> Model::backward(const ForwardTrace& trace,
                                                 const Matrix& grad_logits) const {
  if (trace.spatial.size() != spatial_.size() || trace.head.size() != head_.size())
    throw ContractError("forward trace does not belong to this model");

  std::vector<std::vector<std::vector<double>>> head_grads;
  Matrix grad_z = backprop_stack(head_, trace.head, grad_logits, head_grads);

  std::vector<std::vector<std::vector<double>>> spatial_grads;
  if (!spatial_.empty())
    backprop_stack(spatial_, trace.spatial, grad_z.reshaped(trace.batch * config_.bands, 1),
                   spatial_grads);

  std::vector<std::vector<double>> out;
  for (auto* stack : {&spatial_grads, &head_grads})
    for (auto& layer : *stack)
      for (auto& tensor : layer) out.push_back(std::move(tensor));
  return out;
}

std::vector<NamedParam> Model::parameters() {
  std::vector<NamedParam> out;
  auto add = [&](std::vector<Layer>& stack, std::string_view prefix) {
    for (std::size_t l = 0; l < stack.size(); ++l)
      for (auto& p : params(stack[l]))
        out.push_back({std::string(prefix) + "." + std::to_string(l) + "." + std::string(p.name),
                       p.shape, p.values});
  };
  const bool ss = is_spatial_spectral(config_.variant);
  add(spatial_, "spatial");
  add(head_, ss ? "spectral" : "flat");
  return out;
}

std::vector<ConstNamedParam> Model::parameters() const {
  std::vector<ConstNamedParam> out;
  auto add = [&](const std::vector<Layer>& stack, std::string_view prefix) {
    for (std::size_t l = 0; l < stack.size(); ++l)
      for (const auto& p : params(stack[l]))
        out.push_back({std::string(prefix) + "." + std::to_string(l) + "." + std::string(p.name),
                       p.shape, p.values});
  };
  const bool ss = is_spatial_spectral(config_.variant);
  add(spatial_, "spatial");
  add(head_, ss ? "spectral" : "flat");
  return out;
}

std::uint64_t Model::total_params() const {
  std::uint64_t total = 0;
  for (const auto& layer : spatial_) total += param_count(layer);
  for (const auto& layer : head_) total += param_count(layer);
  return total;
}

std::uint64_t Model::total_flops() const {
  std::uint64_t spatial = 0;
  for (const auto& layer : spatial_) spatial += flop_count(layer);
  std::uint64_t head = 0;
  for (const auto& layer : head_) head += flop_count(layer);
  return spatial * config_.bands + head;
}

}  // namespace spectralkan
