#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dephase/characteristics.hpp"
#include "dephase/norms_grids.hpp"
#include "dephase/order_parameter.hpp"
#include "dephase/spectral_state.hpp"

namespace dephase {

enum class QuadratureMode {
  /// z = z_free (closed form) + quadrature of (e^{iD} - 1) e^{i(theta + omega t)} f_inf.
  /// The free part carries all the oscillation in omega, so the rule only has
  /// to resolve the O(mu) correction.
  Split,
  /// Plain tensor quadrature of e^{i Theta} f_inf.
  Direct,
};

/// z(t_i) = int int e^{i Theta(t_i, theta, omega)} f_inf dtheta domega on the label grid.
/// Throws QuadratureError when the grid cannot represent the state.
OrderParameterPath order_parameter_of(const CharacteristicField& theta, const AsymptoticState& state,
                                      const Grid& grid, QuadratureMode mode = QuadratureMode::Split);

struct OuterOptions {
  double tol_picard = 1e-13;
  double tol_outer = 1e-10;
  int max_sweeps = 200;
  int max_outer = 30;
  /// Largest admissible mu * tail_bound(t_max, ||R||_w, w), in radians of phase.
  double tail_budget = 1e-8;
  QuadratureMode mode = QuadratureMode::Split;
};

enum class OuterStatus { Converged, MaxIterations, NotConverging, NonContractive, TailBudgetExceeded };

std::string to_string(OuterStatus status);

struct LedgerEntry {
  int n = 0;
  double z_norm = 0.0;         // ||z_n||_w
  double r_sup = 0.0;          // max_t R_n
  double prev_r_norm = 0.0;    // ||R_{n-1}||_w, the forcing of Theta_n
  double dz_norm = 0.0;        // ||z_n - z_{n-1}||_w
  std::optional<double> cauchy_ratio;
  ContractionReport contraction;
  double estimrn_ratio = 0.0;  // ||D_n||_dev / (mu K ||R_{n-1}||_w); 0 when the bound is 0
  double tail_bound = 0.0;     // mu * tail_bound(t_max, ||R_{n-1}||_w, w)
  double deviation_step = 0.0; // ||D_n - D_{n-1}||_dev
  GammaBetaReport gamma_beta;
  bool finite = true;
};

struct DiagnosticsLedger {
  std::string weight;
  double mu = 0.0;
  std::vector<LedgerEntry> entries;
  SpectralSupremum spectral;  // decay functionals of f_inf evaluated at the run's rate
  OuterStatus status = OuterStatus::Converged;
  std::string message;
};

struct OuterResult {
  OrderParameterPath z;        // last z_n
  OrderParameterPath z_drive;  // z_{n-1}, the path that generated the returned field
  CharacteristicField field;   // Theta_n
  DiagnosticsLedger ledger;

  bool converged() const { return ledger.status == OuterStatus::Converged; }
};

/// Outer iteration (P_n) from R_0 = 0. Failures of the contraction or of the
/// Cauchy property are reported through ledger.status rather than thrown, so the
/// ledger of a failed run remains available.
OuterResult outer_solve(const AsymptoticState& state, const Grid& grid, double mu,
                        const WeightSpec& w, const OuterOptions& options = {});

struct DensitySnapshot {
  double t = 0.0;
  std::size_t time_index = 0;
  std::vector<double> density;  // f(t, Theta(t, label), omega_l), label-major as the grid
  std::vector<double> free;     // f_inf(Theta - omega t, omega_l)
  double mass_jacobian = 0.0;   // label sum with the spectral derivative of Theta in theta
  double mass_physical = 0.0;   // periodic trapezoid in x = Theta on each omega line
};

struct ReconstructedDensity {
  std::vector<double> times;
  std::vector<double> dephasing_distance;  // per grid time
  std::vector<DensitySnapshot> snapshots;
  double min_density_ratio = 0.0;          // min f / f_inf over all labels and times
};

/// Density along characteristics f = f_inf exp(-mu int_t^{t_max} R cos(Theta - phi) ds).
/// `times` must lie on grid nodes; throws std::out_of_range otherwise.
ReconstructedDensity reconstruct(const CharacteristicSolver& solver, const CharacteristicField& theta,
                                 const OrderParameterPath& z_drive, const AsymptoticState& state,
                                 double mu, const std::vector<double>& times);

struct RatioSeries {
  std::string name;
  std::vector<int> n;
  std::vector<double> ratio;
  double slope = 0.0;  // least squares in n
  bool bounded = true;
};

struct LemmaCheck {
  std::string name;
  bool explicit_constant = true;
  bool passed = true;
  double worst = 0.0;  // largest measured LHS / RHS
  std::string detail;
};

struct LemmaReport {
  std::vector<LemmaCheck> checks;  // explicit constants, asserted
  std::vector<RatioSeries> ratios; // generic constants, reported
  bool passed = true;
};

/// Asserts the inequalities with explicit constants (with relative `slack`) and
/// reports the measured ratios of those stated with generic constants.
LemmaReport verify_lemmas(const DiagnosticsLedger& ledger, const WeightSpec& w, double mu,
                          double slack = 0.05, double slope_limit = 0.01);

/// Least-squares slope of y against x.
double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dephase
