#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "spectralkan/matrix.hpp"
#include "spectralkan/spline.hpp"

namespace spectralkan {

enum class LayerKind { Dense, FullKan, SharedKan };

std::string_view to_string(LayerKind kind);

double silu(double x);
double silu_derivative(double x);

/// Mutable view of one named parameter tensor owned by a layer.
struct ParamView {
  std::string_view name;
  std::vector<std::size_t> shape;
  std::span<double> values;
};

struct ConstParamView {
  std::string_view name;
  std::vector<std::size_t> shape;
  std::span<const double> values;
};

/// Identity token that is fresh for every constructed or copied layer, so a
/// cache can be matched to the exact layer object that produced it.
class LayerId {
 public:
  LayerId();
  LayerId(const LayerId&);
  LayerId& operator=(const LayerId&);
  LayerId(LayerId&&) noexcept = default;
  LayerId& operator=(LayerId&&) noexcept = default;
  std::uint64_t value() const noexcept { return value_; }

 private:
  std::uint64_t value_;
};

/// Intermediate values kept by forward() for the matching backward() call.
struct LayerCache {
  std::uint64_t owner = 0;
  LayerKind kind = LayerKind::Dense;
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  Matrix input;
  // KAN layers: per input element (batch * d_in) and per basis function.
  std::vector<double> silu;
  std::vector<double> silu_grad;
  std::vector<double> basis;
  std::vector<double> basis_grad;
  // Dense layers: W x + b before the activation.
  Matrix pre_activation;
};

/// Gradients of a scalar loss; `params` follows the order of params().
struct LayerGradients {
  Matrix input;
  std::vector<std::vector<double>> params;
};

/// KAN layer with an independent activation on every edge:
/// out_j = sum_i w_a[j,i] SiLU(x_i) + w_b[j,i] sum_s c[j,i,s] B_s(x_i).
class FullKanLayer {
 public:
  FullKanLayer(std::size_t d_in, std::size_t d_out, SplineGrid grid = SplineGrid::standard());

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  const SplineGrid& grid() const noexcept { return grid_; }
  std::uint64_t id() const noexcept { return id_.value(); }

  double& w_a(std::size_t j, std::size_t i) { return w_a_[j * d_in_ + i]; }
  double& w_b(std::size_t j, std::size_t i) { return w_b_[j * d_in_ + i]; }
  std::span<double> coeffs(std::size_t j, std::size_t i) {
    const std::size_t s = grid_.basis_count();
    return {c_.data() + (j * d_in_ + i) * s, s};
  }

  Matrix forward(const Matrix& inputs, LayerCache& cache) const;
  LayerGradients backward(const LayerCache& cache, const Matrix& grad_out) const;

  std::vector<ParamView> params();
  std::vector<ConstParamView> params() const;
  std::uint64_t param_count() const;
  std::uint64_t flop_count() const;

 private:
  std::size_t d_in_;
  std::size_t d_out_;
  SplineGrid grid_;
  std::vector<double> w_a_;
  std::vector<double> w_b_;
  std::vector<double> c_;
  LayerId id_;
};

/// KAN encoder layer: every edge leaving input i reuses the same SiLU and the
/// same spline sum_s c[i,s] B_s(x_i); edges only differ in w_a and w_b.
class SharedKanLayer {
 public:
  SharedKanLayer(std::size_t d_in, std::size_t d_out, SplineGrid grid = SplineGrid::standard());

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  const SplineGrid& grid() const noexcept { return grid_; }
  std::uint64_t id() const noexcept { return id_.value(); }

  double& w_a(std::size_t j, std::size_t i) { return w_a_[j * d_in_ + i]; }
  double& w_b(std::size_t j, std::size_t i) { return w_b_[j * d_in_ + i]; }
  std::span<double> coeffs(std::size_t i) {
    const std::size_t s = grid_.basis_count();
    return {c_.data() + i * s, s};
  }

  Matrix forward(const Matrix& inputs, LayerCache& cache) const;
  LayerGradients backward(const LayerCache& cache, const Matrix& grad_out) const;

  std::vector<ParamView> params();
  std::vector<ConstParamView> params() const;
  std::uint64_t param_count() const;
  std::uint64_t flop_count() const;

 private:
  std::size_t d_in_;
  std::size_t d_out_;
  SplineGrid grid_;
  std::vector<double> w_a_;
  std::vector<double> w_b_;
  std::vector<double> c_;
  LayerId id_;
};

/// Affine layer W x + b, optionally followed by SiLU.
class DenseLayer {
 public:
  DenseLayer(std::size_t d_in, std::size_t d_out, bool has_activation);

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  bool has_activation() const noexcept { return has_activation_; }
  std::uint64_t id() const noexcept { return id_.value(); }

  double& weight(std::size_t j, std::size_t i) { return weights_[j * d_in_ + i]; }
  double& bias(std::size_t j) { return bias_[j]; }

  Matrix forward(const Matrix& inputs, LayerCache& cache) const;
  LayerGradients backward(const LayerCache& cache, const Matrix& grad_out) const;

  std::vector<ParamView> params();
  std::vector<ConstParamView> params() const;
  std::uint64_t param_count() const;
  std::uint64_t flop_count() const;

 private:
  std::size_t d_in_;
  std::size_t d_out_;
  bool has_activation_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  LayerId id_;
};

using Layer = std::variant<DenseLayer, FullKanLayer, SharedKanLayer>;

LayerKind kind_of(const Layer& layer);
std::size_t d_in(const Layer& layer);
std::size_t d_out(const Layer& layer);

Matrix forward(const Layer& layer, const Matrix& inputs, LayerCache& cache);
LayerGradients backward(const Layer& layer, const LayerCache& cache, const Matrix& grad_out);
std::vector<ParamView> params(Layer& layer);
std::vector<ConstParamView> params(const Layer& layer);

/// Exact number of scalar parameters.
std::uint64_t param_count(const Layer& layer);

/// FLOPs under the reporting convention: SiLU = 4, spline = 96 and 1 per
/// weight multiplication. For the shared layer the activations are counted
/// once per input node.
std::uint64_t flop_count(const Layer& layer);

/// Kaiming-uniform initialization: every trainable value is drawn from
/// U(-sqrt(6 / d_in), +sqrt(6 / d_in)); dense biases start at zero.
/// `has_activation` only applies to dense layers.
Layer init_params(LayerKind kind, std::size_t d_in, std::size_t d_out, const SplineGrid& grid,
                  std::uint64_t seed, bool has_activation = true);

}  // namespace spectralkan
