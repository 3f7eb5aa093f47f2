#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "dephase/norms_grids.hpp"

namespace dephase {

/// Below this modulus the phase of z is treated as undefined.
inline constexpr double kPhaseFloor = 1e-12;

/// z(t) = R(t) e^{i phi(t)} sampled on the time grid.
struct OrderParameterPath {
  std::vector<double> times;
  std::vector<std::complex<double>> z;

  static OrderParameterPath zeros(const Grid& grid);

  std::size_t size() const { return z.size(); }
  double modulus(std::size_t i) const { return std::abs(z[i]); }
  std::optional<double> phase(std::size_t i) const;
  std::vector<double> moduli() const;
  bool identically_zero() const;
  double norm(const WeightSpec& w) const { return weighted_norm(z, times, w); }
};

/// Pointwise difference a - b on a shared time grid.
OrderParameterPath difference(const OrderParameterPath& a, const OrderParameterPath& b);

}  // namespace dephase
