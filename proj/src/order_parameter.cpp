#include "dephase/order_parameter.hpp"

#include <algorithm>

namespace dephase {

OrderParameterPath OrderParameterPath::zeros(const Grid& grid) {
  OrderParameterPath p;
  p.times = grid.times();
  p.z.assign(p.times.size(), {0.0, 0.0});
  return p;
}

std::optional<double> OrderParameterPath::phase(std::size_t i) const {
  if (std::abs(z[i]) < kPhaseFloor) return std::nullopt;
  return std::arg(z[i]);
}

std::vector<double> OrderParameterPath::moduli() const {
  std::vector<double> r(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) r[i] = std::abs(z[i]);
  return r;
}

bool OrderParameterPath::identically_zero() const {
  return std::all_of(z.begin(), z.end(), [](const auto& v) { return v == std::complex<double>{}; });
}

OrderParameterPath difference(const OrderParameterPath& a, const OrderParameterPath& b) {
  if (a.z.size() != b.z.size()) throw GridMismatch("order parameter paths differ in length");
  OrderParameterPath d;
  d.times = a.times;
  d.z.resize(a.z.size());
  for (std::size_t i = 0; i < a.z.size(); ++i) d.z[i] = a.z[i] - b.z[i];
  return d;
}

}  // namespace dephase
