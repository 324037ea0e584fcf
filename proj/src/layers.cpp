#include "spectralkan/layers.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "spectralkan/errors.hpp"
#include "spectralkan/rng.hpp"

namespace spectralkan {

namespace {

// FLOP convention for a single input element.
constexpr std::uint64_t kSiluFlops = 4;
constexpr std::uint64_t kSplineFlops = 96;
constexpr std::uint64_t kWeightFlops = 1;

std::atomic<std::uint64_t> next_layer_id{1};

void check_inputs(const Matrix& inputs, std::size_t d_in) {
  if (inputs.cols() != d_in)
    throw ContractError("layer expects " + std::to_string(d_in) + " input columns, got " +
                        std::to_string(inputs.cols()));
  for (double v : inputs.values())
    if (!std::isfinite(v)) throw DomainError("layer input is not finite");
}

void check_cache(const LayerCache& cache, std::uint64_t owner, LayerKind kind, std::size_t d_in,
                 std::size_t d_out, const Matrix& grad_out) {
  if (cache.owner != owner || cache.kind != kind || cache.d_in != d_in || cache.d_out != d_out)
    throw ContractError("layer cache was not produced by this layer");
  if (grad_out.rows() != cache.input.rows() || grad_out.cols() != d_out)
    throw ContractError("upstream gradient shape does not match the cached batch");
}

void begin_cache(LayerCache& cache, std::uint64_t owner, LayerKind kind, std::size_t d_in,
                 std::size_t d_out, const Matrix& inputs) {
  cache = LayerCache{};
  cache.owner = owner;
  cache.kind = kind;
  cache.d_in = d_in;
  cache.d_out = d_out;
  cache.input = inputs;
}

// SiLU and spline basis for every input element, shared by both KAN kinds.
void fill_activations(const Matrix& inputs, const SplineGrid& grid, LayerCache& cache) {
  const std::size_t n = inputs.size();
  const std::size_t s = grid.basis_count();
  cache.silu.resize(n);
  cache.silu_grad.resize(n);
  cache.basis.resize(n * s);
  cache.basis_grad.resize(n * s);
  const auto x = inputs.values();
  for (std::size_t e = 0; e < n; ++e) {
    cache.silu[e] = silu(x[e]);
    cache.silu_grad[e] = silu_derivative(x[e]);
    evaluate_basis(grid, x[e], std::span<double>(cache.basis).subspan(e * s, s),
                   std::span<double>(cache.basis_grad).subspan(e * s, s));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void fill_uniform(std::span<double> values, Rng& rng, double bound) {
  for (double& v : values) v = uniform(rng, -bound, bound);
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::FullKan: return "full_kan";
    case LayerKind::SharedKan: return "shared_kan";
  }
  return "unknown";
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_derivative(double x) {
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return sig * (1.0 + x * (1.0 - sig));
}

LayerId::LayerId() : value_(next_layer_id.fetch_add(1)) {}
LayerId::LayerId(const LayerId&) : value_(next_layer_id.fetch_add(1)) {}
LayerId& LayerId::operator=(const LayerId&) {
  value_ = next_layer_id.fetch_add(1);
  return *this;
}

// ---------------------------------------------------------------- FullKanLayer

FullKanLayer::FullKanLayer(std::size_t d_in, std::size_t d_out, SplineGrid grid)
    : d_in_(d_in),
      d_out_(d_out),
      grid_(std::move(grid)),
      w_a_(d_in * d_out),
      w_b_(d_in * d_out),
      c_(d_in * d_out * grid_.basis_count()) {
  if (d_in == 0 || d_out == 0) throw ContractError("layer dimensions must be positive");
}

Matrix FullKanLayer::forward(const Matrix& inputs, LayerCache& cache) const {
  check_inputs(inputs, d_in_);
  begin_cache(cache, id(), LayerKind::FullKan, d_in_, d_out_, inputs);
  fill_activations(inputs, grid_, cache);

  const std::size_t s = grid_.basis_count();
  Matrix out(inputs.rows(), d_out_);
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    for (std::size_t j = 0; j < d_out_; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d_in_; ++i) {
        const std::size_t e = b * d_in_ + i;
        const std::size_t edge = j * d_in_ + i;
        const double spline = dot({c_.data() + edge * s, s}, {cache.basis.data() + e * s, s});
        acc += w_a_[edge] * cache.silu[e] + w_b_[edge] * spline;
      }
      out(b, j) = acc;
    }
  }
  return out;
}

LayerGradients FullKanLayer::backward(const LayerCache& cache, const Matrix& grad_out) const {
  check_cache(cache, id(), LayerKind::FullKan, d_in_, d_out_, grad_out);
  const std::size_t s = grid_.basis_count();
  LayerGradients g;
  g.input = Matrix(grad_out.rows(), d_in_);
  g.params = {std::vector<double>(w_a_.size()), std::vector<double>(w_b_.size()),
              std::vector<double>(c_.size())};
  auto& dw_a = g.params[0];
  auto& dw_b = g.params[1];
  auto& dc = g.params[2];

  for (std::size_t b = 0; b < grad_out.rows(); ++b) {
    for (std::size_t i = 0; i < d_in_; ++i) {
      const std::size_t e = b * d_in_ + i;
      const std::span<const double> basis(cache.basis.data() + e * s, s);
      const std::span<const double> basis_grad(cache.basis_grad.data() + e * s, s);
      double dx = 0.0;
      for (std::size_t j = 0; j < d_out_; ++j) {
        const double up = grad_out(b, j);
        const std::size_t edge = j * d_in_ + i;
        const std::span<const double> coeffs(c_.data() + edge * s, s);
        dw_a[edge] += up * cache.silu[e];
        dw_b[edge] += up * dot(coeffs, basis);
        const double scale = up * w_b_[edge];
        for (std::size_t k = 0; k < s; ++k) dc[edge * s + k] += scale * basis[k];
        dx += up * (w_a_[edge] * cache.silu_grad[e] + w_b_[edge] * dot(coeffs, basis_grad));
      }
      g.input(b, i) = dx;
    }
  }
  return g;
}

std::vector<ParamView> FullKanLayer::params() {
  return {{"w_a", {d_out_, d_in_}, w_a_},
          {"w_b", {d_out_, d_in_}, w_b_},
          {"c", {d_out_, d_in_, grid_.basis_count()}, c_}};
}

std::vector<ConstParamView> FullKanLayer::params() const {
  return {{"w_a", {d_out_, d_in_}, w_a_},
          {"w_b", {d_out_, d_in_}, w_b_},
          {"c", {d_out_, d_in_, grid_.basis_count()}, c_}};
}

std::uint64_t FullKanLayer::param_count() const {
  return (2 + grid_.basis_count()) * d_in_ * d_out_;
}

std::uint64_t FullKanLayer::flop_count() const {
  return (kSplineFlops + kSiluFlops + 2 * kWeightFlops) * d_in_ * d_out_;
}

// -------------------------------------------------------------- SharedKanLayer

SharedKanLayer::SharedKanLayer(std::size_t d_in, std::size_t d_out, SplineGrid grid)
    : d_in_(d_in),
      d_out_(d_out),
      grid_(std::move(grid)),
      w_a_(d_in * d_out),
      w_b_(d_in * d_out),
      c_(d_in * grid_.basis_count()) {
  if (d_in == 0 || d_out == 0) throw ContractError("layer dimensions must be positive");
}

Matrix SharedKanLayer::forward(const Matrix& inputs, LayerCache& cache) const {
  check_inputs(inputs, d_in_);
  begin_cache(cache, id(), LayerKind::SharedKan, d_in_, d_out_, inputs);
  fill_activations(inputs, grid_, cache);

  const std::size_t s = grid_.basis_count();
  Matrix out(inputs.rows(), d_out_);
  std::vector<double> spline(d_in_);
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    for (std::size_t i = 0; i < d_in_; ++i) {
      const std::size_t e = b * d_in_ + i;
      spline[i] = dot({c_.data() + i * s, s}, {cache.basis.data() + e * s, s});
    }
    for (std::size_t j = 0; j < d_out_; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d_in_; ++i) {
        const std::size_t edge = j * d_in_ + i;
        acc += w_a_[edge] * cache.silu[b * d_in_ + i] + w_b_[edge] * spline[i];
      }
      out(b, j) = acc;
    }
  }
  return out;
}

LayerGradients SharedKanLayer::backward(const LayerCache& cache, const Matrix& grad_out) const {
  check_cache(cache, id(), LayerKind::SharedKan, d_in_, d_out_, grad_out);
  const std::size_t s = grid_.basis_count();
  LayerGradients g;
  g.input = Matrix(grad_out.rows(), d_in_);
  g.params = {std::vector<double>(w_a_.size()), std::vector<double>(w_b_.size()),
              std::vector<double>(c_.size())};
  auto& dw_a = g.params[0];
  auto& dw_b = g.params[1];
  auto& dc = g.params[2];

  for (std::size_t b = 0; b < grad_out.rows(); ++b) {
    for (std::size_t i = 0; i < d_in_; ++i) {
      const std::size_t e = b * d_in_ + i;
      const std::span<const double> coeffs(c_.data() + i * s, s);
      const std::span<const double> basis(cache.basis.data() + e * s, s);
      const double spline = dot(coeffs, basis);
      const double spline_grad = dot(coeffs, {cache.basis_grad.data() + e * s, s});

      // Upstream signal reaching the shared SiLU and the shared spline.
      double into_silu = 0.0;
      double into_spline = 0.0;
      for (std::size_t j = 0; j < d_out_; ++j) {
        const double up = grad_out(b, j);
        const std::size_t edge = j * d_in_ + i;
        dw_a[edge] += up * cache.silu[e];
        dw_b[edge] += up * spline;
        into_silu += up * w_a_[edge];
        into_spline += up * w_b_[edge];
      }
      for (std::size_t k = 0; k < s; ++k) dc[i * s + k] += into_spline * basis[k];
      g.input(b, i) = into_silu * cache.silu_grad[e] + into_spline * spline_grad;
    }
  }
  return g;
}

std::vector<ParamView> SharedKanLayer::params() {
  return {{"w_a", {d_out_, d_in_}, w_a_},
          {"w_b", {d_out_, d_in_}, w_b_},
          {"c_shared", {d_in_, grid_.basis_count()}, c_}};
}

std::vector<ConstParamView> SharedKanLayer::params() const {
  return {{"w_a", {d_out_, d_in_}, w_a_},
          {"w_b", {d_out_, d_in_}, w_b_},
          {"c_shared", {d_in_, grid_.basis_count()}, c_}};
}

std::uint64_t SharedKanLayer::param_count() const {
  return 2 * d_in_ * d_out_ + grid_.basis_count() * d_in_;
}

std::uint64_t SharedKanLayer::flop_count() const {
  return (kSplineFlops + kSiluFlops) * d_in_ + 2 * kWeightFlops * d_in_ * d_out_;
}

// ------------------------------------------------------------------ DenseLayer

DenseLayer::DenseLayer(std::size_t d_in, std::size_t d_out, bool has_activation)
    : d_in_(d_in),
      d_out_(d_out),
      has_activation_(has_activation),
      weights_(d_in * d_out),
      bias_(d_out) {
  if (d_in == 0 || d_out == 0) throw ContractError("layer dimensions must be positive");
}

Matrix DenseLayer::forward(const Matrix& inputs, LayerCache& cache) const {
  check_inputs(inputs, d_in_);
  begin_cache(cache, id(), LayerKind::Dense, d_in_, d_out_, inputs);
  Matrix pre(inputs.rows(), d_out_);
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    const auto x = inputs.row(b);
    for (std::size_t j = 0; j < d_out_; ++j)
      pre(b, j) = dot({weights_.data() + j * d_in_, d_in_}, x) + bias_[j];
  }
  Matrix out = pre;
  if (has_activation_)
    for (double& v : out.values()) v = silu(v);
  cache.pre_activation = std::move(pre);
  return out;
}

LayerGradients DenseLayer::backward(const LayerCache& cache, const Matrix& grad_out) const {
  check_cache(cache, id(), LayerKind::Dense, d_in_, d_out_, grad_out);
  LayerGradients g;
  g.input = Matrix(grad_out.rows(), d_in_);
  g.params = {std::vector<double>(weights_.size()), std::vector<double>(bias_.size())};
  auto& dw = g.params[0];
  auto& db = g.params[1];
  for (std::size_t b = 0; b < grad_out.rows(); ++b) {
    const auto x = cache.input.row(b);
    for (std::size_t j = 0; j < d_out_; ++j) {
      double dz = grad_out(b, j);
      if (has_activation_) dz *= silu_derivative(cache.pre_activation(b, j));
      db[j] += dz;
      for (std::size_t i = 0; i < d_in_; ++i) {
        dw[j * d_in_ + i] += dz * x[i];
        g.input(b, i) += dz * weights_[j * d_in_ + i];
      }
    }
  }
  return g;
}

std::vector<ParamView> DenseLayer::params() {
  return {{"weights", {d_out_, d_in_}, weights_}, {"bias", {d_out_}, bias_}};
}

std::vector<ConstParamView> DenseLayer::params() const {
  return {{"weights", {d_out_, d_in_}, weights_}, {"bias", {d_out_}, bias_}};
}

std::uint64_t DenseLayer::param_count() const { return d_in_ * d_out_ + d_out_; }

std::uint64_t DenseLayer::flop_count() const { return 2 * d_in_ * d_out_ + d_out_; }

// ------------------------------------------------------------- variant helpers

LayerKind kind_of(const Layer& layer) {
  switch (layer.index()) {
    case 0: return LayerKind::Dense;
    case 1: return LayerKind::FullKan;
    default: return LayerKind::SharedKan;
  }
}

std::size_t d_in(const Layer& layer) {
  return std::visit([](const auto& l) { return l.d_in(); }, layer);
}

std::size_t d_out(const Layer& layer) {
  return std::visit([](const auto& l) { return l.d_out(); }, layer);
}

Matrix forward(const Layer& layer, const Matrix& inputs, LayerCache& cache) {
  return std::visit([&](const auto& l) { return l.forward(inputs, cache); }, layer);
}

LayerGradients backward(const Layer& layer, const LayerCache& cache, const Matrix& grad_out) {
  return std::visit([&](const auto& l) { return l.backward(cache, grad_out); }, layer);
}

std::vector<ParamView> params(Layer& layer) {
  return std::visit([](auto& l) { return l.params(); }, layer);
}

std::vector<ConstParamView> params(const Layer& layer) {
  return std::visit([](const auto& l) { return l.params(); }, layer);
}

std::uint64_t param_count(const Layer& layer) {
  return std::visit([](const auto& l) { return l.param_count(); }, layer);
}

std::uint64_t flop_count(const Layer& layer) {
  return std::visit([](const auto& l) { return l.flop_count(); }, layer);
}

Layer init_params(LayerKind kind, std::size_t d_in, std::size_t d_out, const SplineGrid& grid,
                  std::uint64_t seed, bool has_activation) {
  if (d_in == 0 || d_out == 0) throw ContractError("layer dimensions must be positive");
  Layer layer = [&]() -> Layer {
    switch (kind) {
      case LayerKind::Dense: return DenseLayer(d_in, d_out, has_activation);
      case LayerKind::FullKan: return FullKanLayer(d_in, d_out, grid);
      case LayerKind::SharedKan: return SharedKanLayer(d_in, d_out, grid);
    }
    throw ContractError("unknown layer kind");
  }();

  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(d_in));
  for (auto& p : params(layer)) {
    if (p.name == "bias") continue;
    fill_uniform(p.values, rng, bound);
  }
  return layer;
}

}  // namespace spectralkan
