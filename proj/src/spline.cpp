#include "spectralkan/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "spectralkan/errors.hpp"

namespace spectralkan {

SplineGrid::SplineGrid(int degree, int grid_size, double domain_lo, double domain_hi)
    : degree_(degree), grid_size_(grid_size), lo_(domain_lo), hi_(domain_hi) {
  if (degree < 0) throw ContractError("spline degree must be non-negative");
  if (grid_size < 1) throw ContractError("spline grid size must be positive");
  if (!(std::isfinite(domain_lo) && std::isfinite(domain_hi)) || !(domain_lo < domain_hi))
    throw ContractError("spline domain must be a finite interval with lo < hi");
  const double h = spacing();
  knots_.reserve(static_cast<std::size_t>(grid_size + 2 * degree + 1));
  for (int i = -degree; i <= grid_size + degree; ++i) knots_.push_back(lo_ + i * h);
}

namespace {

// Scratch storage for the recursion table; avoids a heap allocation per call
// for every grid of practical size.
class Scratch {
 public:
  explicit Scratch(std::size_t n) {
    if (n > inline_.size()) heap_.resize(n);
    data_ = n > inline_.size() ? std::span<double>(heap_) : std::span<double>(inline_).first(n);
  }
  std::span<double> span() { return data_; }

 private:
  std::array<double, 64> inline_{};
  std::vector<double> heap_;
  std::span<double> data_;
};

}  // namespace

void evaluate_basis(const SplineGrid& grid, double x, std::span<double> values,
                    std::span<double> derivatives) {
  if (!std::isfinite(x)) throw DomainError("spline input is not finite");
  const std::size_t count = grid.basis_count();
  if (!values.empty() && values.size() != count)
    throw ContractError("basis value buffer has wrong length");
  if (!derivatives.empty() && derivatives.size() != count)
    throw ContractError("basis derivative buffer has wrong length");

  const auto t = grid.knots();
  const std::size_t spans = t.size() - 1;
  const int k = grid.degree();

  Scratch table_storage(spans);
  Scratch lower_storage(spans);
  auto table = table_storage.span();
  auto lower = lower_storage.span();

  // Degree 0: half-open indicators, with the domain's right edge folded into
  // the last domain span.
  for (std::size_t j = 0; j < spans; ++j) table[j] = (t[j] <= x && x < t[j + 1]) ? 1.0 : 0.0;
  if (x == grid.domain_hi()) {
    std::fill(table.begin(), table.end(), 0.0);
    table[static_cast<std::size_t>(k + grid.grid_size() - 1)] = 1.0;
  }

  // Raise the degree in place; entry i only reads i and i + 1.
  for (int d = 1; d <= k; ++d) {
    if (d == k) std::copy(table.begin(), table.end(), lower.begin());
    const std::size_t active = spans - static_cast<std::size_t>(d);
    for (std::size_t i = 0; i < active; ++i) {
      const double left = (x - t[i]) / (t[i + d] - t[i]);
      const double right = (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]);
      table[i] = left * table[i] + right * table[i + 1];
    }
  }

  if (!values.empty()) std::copy_n(table.begin(), count, values.begin());

  if (!derivatives.empty()) {
    if (k == 0) {
      std::fill(derivatives.begin(), derivatives.end(), 0.0);
      return;
    }
    // lower holds the degree k-1 basis, of which there are count + 1.
    for (std::size_t i = 0; i < count; ++i) {
      derivatives[i] = k * (lower[i] / (t[i + k] - t[i]) -
                            lower[i + 1] / (t[i + k + 1] - t[i + 1]));
    }
  }
}

std::vector<double> basis_values(const SplineGrid& grid, double x) {
  std::vector<double> out(grid.basis_count());
  evaluate_basis(grid, x, out, {});
  return out;
}

std::vector<double> basis_derivatives(const SplineGrid& grid, double x) {
  std::vector<double> out(grid.basis_count());
  evaluate_basis(grid, x, {}, out);
  return out;
}

double spline_eval(std::span<const double> coeffs, const SplineGrid& grid, double x) {
  if (coeffs.size() != grid.basis_count())
    throw ContractError("spline coefficient count " + std::to_string(coeffs.size()) +
                        " does not match basis count " +
                        std::to_string(grid.basis_count()));
  Scratch storage(coeffs.size());
  auto basis = storage.span();
  evaluate_basis(grid, x, basis, {});
  double sum = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) sum += coeffs[i] * basis[i];
  return sum;
}

}  // namespace spectralkan
