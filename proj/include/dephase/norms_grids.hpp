#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dephase/spectral_state.hpp"

namespace dephase {

/// Raised when the label quadrature cannot represent the state.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when two objects that must share a grid do not.
class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

struct OmegaNode {
  double omega = 0.0;
  double weight = 0.0;  // d(omega) quadrature weight
  double mass = 0.0;    // weight * g(omega), with the exact Jacobian where a substitution is used
};

struct GridSpec {
  double dt = 0.05;
  double t_max = 20.0;
  int theta_nodes = 64;
  int omega_nodes = 129;
  double omega_cutoff = 0.0;  // <= 0 selects the per-profile default
  double mass_tol = 1e-8;
};

/// Tensor grid: uniform time grid on [0, t_max], uniform theta nodes on the
/// torus, and an omega rule adapted to the frequency profile.
///   Gaussian:   Gauss-Legendre on [-Omega, Omega], Omega = 6.5 sigma
///   Laplace:    Gauss-Legendre on [-Omega, 0] and [0, Omega], Omega = 21 b
///   Lorentzian: Gauss-Legendre in u = arctan(omega / s) on (-pi/2, pi/2)
class Grid {
 public:
  static Grid build(const GridSpec& spec, const FrequencyProfile& profile);

  double dt() const { return dt_; }
  double t_max() const { return t_max_; }
  std::size_t time_count() const { return n_times_; }
  double time(std::size_t i) const { return static_cast<double>(i) * dt_; }
  std::vector<double> times() const;

  std::size_t theta_count() const { return n_theta_; }
  double theta(std::size_t j) const;
  double theta_weight() const;  // 2 pi / M

  const std::vector<OmegaNode>& omega_nodes() const { return omega_; }
  std::size_t omega_count() const { return omega_.size(); }

  std::size_t label_count() const { return n_theta_ * omega_.size(); }
  /// Labels are ordered omega-major: label = l * M + j.
  std::size_t label_index(std::size_t j, std::size_t l) const { return l * n_theta_ + j; }

  /// Sum of omega masses; equals 1 up to the discarded tail mass.
  double omega_mass() const;
  const GridSpec& spec() const { return spec_; }
  ProfileKind profile_kind() const { return profile_kind_; }
  double profile_parameter() const { return profile_parameter_; }

  bool same_as(const Grid& other) const;

 private:
  GridSpec spec_;
  double dt_ = 0.0;
  double t_max_ = 0.0;
  std::size_t n_times_ = 0;
  std::size_t n_theta_ = 0;
  std::vector<OmegaNode> omega_;
  ProfileKind profile_kind_ = ProfileKind::Gaussian;
  double profile_parameter_ = 1.0;
};

struct QuadratureReport {
  double omega_mass = 0.0;
  double label_mass = 0.0;  // sum over labels of weight * f_inf
  double mass_error = 0.0;
  int theta_nodes = 0;
  int required_theta_nodes = 0;
  bool passed = false;
  std::string message;
};

/// Mass and resolution check of the label quadrature against a state.
QuadratureReport check_quadrature(const Grid& grid, const AsymptoticState& state);
/// Same as check_quadrature but throws QuadratureError on failure.
void require_quadrature(const Grid& grid, const AsymptoticState& state);

enum class WeightKind { Exponential, Polynomial };

/// Time weight w(t) = e^{lambda t} or <t>^gamma with <t> = (1 + t^2)^{1/2}.
class WeightSpec {
 public:
  static WeightSpec exponential(double lambda);
  static WeightSpec polynomial(double gamma);

  WeightKind kind() const { return kind_; }
  double rate() const { return rate_; }
  std::string name() const;

  double operator()(double t) const;
  /// int_T^infty w(s)^{-1} ds in closed form (+inf when it diverges).
  double tail_integral(double T) const;
  /// Weight of the characteristic deviation space: the same space for
  /// exponential weights, one power less for polynomial weights.
  WeightSpec deviation_weight() const;

 private:
  WeightSpec(WeightKind kind, double rate);

  WeightKind kind_;
  double rate_;
};

/// max over grid points of |h(t_i)| w(t_i). Throws std::invalid_argument on empty input.
double weighted_norm(std::span<const double> values, std::span<const double> times,
                     const WeightSpec& w);
double weighted_norm(std::span<const std::complex<double>> values,
                     std::span<const double> times, const WeightSpec& w);
/// Label-major field (label * n_times + i), also maximised over labels.
double weighted_field_norm(std::span<const double> field, std::span<const double> times,
                           const WeightSpec& w);

/// Rigorous bound norm_value * int_T^infty w^{-1} for the discarded tail of
/// int_T^infty R(s) (bounded) ds given ||R||_w <= norm_value.
double tail_bound(double T, double norm_value, const WeightSpec& w);

/// sup_{t >= 0} w_dev(t) int_t^infty w(s)^{-1} ds: the explicit constant in
/// ||Theta - theta - omega t||_dev <= mu K ||R||_w (K = 1/lambda for exponentials).
double deviation_bound_constant(const WeightSpec& w);

}  // namespace dephase
