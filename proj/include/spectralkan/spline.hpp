#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spectralkan {

/// Uniform knot vector shared by every learnable activation.
///
/// The domain [lo, hi] is split into `grid_size` equal spans and the knot
/// vector is extended by `degree` spans on each side, so there are
/// grid_size + 2 * degree + 1 knots and grid_size + degree basis functions.
class SplineGrid {
 public:
  /// Throws ContractError when grid_size < 1, degree < 0 or lo >= hi.
  SplineGrid(int degree, int grid_size, double domain_lo, double domain_hi);

  /// k = 3, grid = 5 on [-1, 1]: eight cubic basis functions.
  static SplineGrid standard() { return SplineGrid(3, 5, -1.0, 1.0); }

  int degree() const noexcept { return degree_; }
  int grid_size() const noexcept { return grid_size_; }
  double domain_lo() const noexcept { return lo_; }
  double domain_hi() const noexcept { return hi_; }
  double spacing() const noexcept { return (hi_ - lo_) / grid_size_; }
  std::size_t basis_count() const noexcept {
    return static_cast<std::size_t>(grid_size_ + degree_);
  }
  std::span<const double> knots() const noexcept { return knots_; }

  bool operator==(const SplineGrid& other) const = default;

 private:
  int degree_;
  int grid_size_;
  double lo_;
  double hi_;
  std::vector<double> knots_;
};

/// B^k_i(x) for i = 0 .. S-1 via the Cox-de Boor recursion. Values decay to
/// zero outside the extended knot range. Throws DomainError for non-finite x.
std::vector<double> basis_values(const SplineGrid& grid, double x);

/// d/dx B^k_i(x) via the degree-reduction formula.
std::vector<double> basis_derivatives(const SplineGrid& grid, double x);

/// Writes basis values and derivatives into caller storage of length S.
/// Either output may be empty to skip it.
void evaluate_basis(const SplineGrid& grid, double x, std::span<double> values,
                    std::span<double> derivatives);

/// sum_i coeffs[i] * B^k_i(x). Throws ContractError if coeffs.size() != S.
double spline_eval(std::span<const double> coeffs, const SplineGrid& grid, double x);

}  // namespace spectralkan
