#pragma once

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dephase/norms_grids.hpp"
#include "dephase/order_parameter.hpp"

namespace dephase {

using complex = std::complex<double>;

class NonContractive : public std::runtime_error {
 public:
  NonContractive(const std::string& what, double factor)
      : std::runtime_error(what), predicted_factor(factor) {}
  double predicted_factor;
};

class MaxSweepsExceeded : public std::runtime_error {
 public:
  MaxSweepsExceeded(const std::string& what, double residual)
      : std::runtime_error(what), last_residual(residual) {}
  double last_residual;
};

class StepRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Characteristics Theta(t_i, theta_j, omega_l) stored as the deviation
/// D = Theta - theta - omega t, label-major: deviation[label * n_times + i].
class CharacteristicField {
 public:
  CharacteristicField() = default;
  /// Free flow (D = 0) on the grid.
  explicit CharacteristicField(const Grid& grid);

  std::size_t label_count() const { return n_labels_; }
  std::size_t time_count() const { return n_times_; }

  std::span<double> trajectory(std::size_t label) {
    return {deviation_.data() + label * n_times_, n_times_};
  }
  std::span<const double> trajectory(std::size_t label) const {
    return {deviation_.data() + label * n_times_, n_times_};
  }
  double deviation(std::size_t label, std::size_t i) const { return deviation_[label * n_times_ + i]; }
  std::span<const double> values() const { return deviation_; }
  std::span<double> values() { return deviation_; }

  /// Full characteristic Theta = theta_j + omega_l t_i + D.
  double theta_value(const Grid& grid, std::size_t i, std::size_t j, std::size_t l) const;

  bool compatible_with(const Grid& grid) const;

  int iterate = 0;
  double weighted_norm = 0.0;  // under the deviation weight of the run

 private:
  std::size_t n_labels_ = 0;
  std::size_t n_times_ = 0;
  std::vector<double> deviation_;
};

/// Product-integration weights for int_{s_i}^{s_i+dt} e^{i omega s} h(s) ds with
/// h replaced by its local cubic interpolant. The oscillation e^{i omega s} is
/// integrated exactly, so the rule stays accurate when omega dt >> 1; for
/// omega = 0 it is a fourth-order Newton-Cotes-type rule.
struct OscillatoryRule {
  OscillatoryRule() = default;
  OscillatoryRule(double omega, double dt);

  // Stencil offsets {0,1,2,3}, {-1,0,1,2}, {-2,-1,0,1} relative to s_i.
  std::array<complex, 4> first{};
  std::array<complex, 4> interior{};
  std::array<complex, 4> last{};
};

struct ContractionReport {
  double predicted_factor = 0.0;  // mu ||R||_w int_0^inf w^{-1}
  double deviation_norm = 0.0;    // ||D||_dev of the returned field
  double deviation_bound = 0.0;   // mu K ||R||_w, K = deviation_bound_constant(w)
  double tail_bound = 0.0;        // mu * tail_bound(t_max, ||R||_w, w), not included in D
  std::vector<double> residuals;  // sup-norm ||D^{m+1} - D^m||
  std::vector<double> increments; // weighted ||D^{m+1} - D^m||_dev
  std::vector<double> ratios;     // increments[m+1] / increments[m], above the roundoff floor
  double max_ratio = 0.0;
  int sweeps = 0;

  bool ratios_within(double slack) const;
  bool deviation_within(double slack) const;
};

struct FixedPointResult {
  CharacteristicField field;
  ContractionReport report;
};

struct OracleOptions {
  double phase_step = 0.2;          // max |omega| h per RK4 substep
  double local_error_budget = 1e-9; // per grid interval, step-doubling estimate
};

/// Pointwise check of |Gamma(t)| <= beta(t) with Gamma = D / mu and
/// beta(t) = int_t^{t_max} R(s) ds.
struct GammaBetaReport {
  double max_ratio = 0.0;  // max |Gamma| / beta over points with beta > 0
  bool beta_nonincreasing = true;
  bool passed = true;
};

/// Solver for the characteristic problem of one outer iterate, built once per grid.
class CharacteristicSolver {
 public:
  CharacteristicSolver(const Grid& grid, WeightSpec weight);

  const Grid& grid() const { return grid_; }
  const WeightSpec& weight() const { return weight_; }
  WeightSpec deviation_weight() const { return weight_.deviation_weight(); }

  /// One application of F(Theta) = theta + omega t + mu int_t^inf R sin(Theta - phi) ds,
  /// truncated at t_max.
  CharacteristicField apply_F(const CharacteristicField& theta, const OrderParameterPath& z_prev,
                              double mu) const;

  /// Picard iteration from the free flow until the sup-norm residual drops below tol.
  FixedPointResult solve_fixed_point(const OrderParameterPath& z_prev, double mu, double tol,
                                     int max_sweeps) const;

  /// Backward RK4 integration of d/dt Theta = omega - mu R sin(Theta - phi) from
  /// Theta(t_max) = theta + omega t_max, with z interpolated between grid nodes.
  CharacteristicField backward_ode_oracle(const OrderParameterPath& z_prev, double mu,
                                          const OracleOptions& options = {}) const;

  /// Oracle for a single label with arbitrary (theta, omega); returns D on the time grid.
  std::vector<double> oracle_trajectory(double theta, double omega, const OrderParameterPath& z_prev,
                                        double mu, const OracleOptions& options = {}) const;

  /// Complex forcing integral mu int_{t_i}^{t_max} e^{i(theta_j + omega_l s)} conj(z(s)) e^{i D(s)} ds
  /// along one label. Its imaginary part is F(Theta) - theta - omega t; its real part is
  /// the exponent of the density reconstruction.
  void forcing_integral(std::size_t label, std::span<const double> deviation,
                        std::span<const complex> z_conj, double mu, std::span<complex> out) const;

  /// beta(t_i) = int_{t_i}^{t_max} R(s) ds.
  std::vector<double> beta(const OrderParameterPath& z) const;

  GammaBetaReport gamma_beta_check(const CharacteristicField& field, const OrderParameterPath& z_prev,
                                   double mu, double slack = 1e-3) const;

 private:
  void check_inputs(const OrderParameterPath& z_prev) const;

  Grid grid_;
  WeightSpec weight_;
  std::vector<OscillatoryRule> rules_;          // per omega node
  std::vector<std::vector<complex>> phasors_;   // e^{i omega_l t_i}
  std::vector<complex> theta_phasors_;          // e^{i theta_j}
  OscillatoryRule zero_rule_;
};

/// Free-function forms.
CharacteristicField apply_F(const CharacteristicSolver& solver, const CharacteristicField& theta,
                            const OrderParameterPath& z_prev, double mu);
FixedPointResult solve_fixed_point(const CharacteristicSolver& solver,
                                   const OrderParameterPath& z_prev, double mu, double tol,
                                   int max_sweeps);
CharacteristicField backward_ode_oracle(const CharacteristicSolver& solver,
                                        const OrderParameterPath& z_prev, double mu);

/// Cubic Lagrange interpolation of a grid-sampled complex path at time t in [0, t_max].
complex interpolate_path(std::span<const complex> values, double dt, double t);

/// Runs fn(k) for k in [0, count) on a fixed number of worker threads. Each k
/// must write disjoint data so the result does not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace dephase
