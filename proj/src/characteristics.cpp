#include "dephase/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/core.h>

namespace dephase {

namespace {

constexpr complex kI{0.0, 1.0};

// mu_k = int_0^1 e^{i alpha x} x^k dx for k = 0..3.
std::array<complex, 4> oscillatory_moments(double alpha) {
  std::array<complex, 4> m{};
  if (std::abs(alpha) < 1.0) {
    for (int k = 0; k < 4; ++k) {
      complex term{1.0, 0.0};  // (i alpha)^j / j!
      complex sum{0.0, 0.0};
      for (int j = 0; j < 40; ++j) {
        const complex add = term / static_cast<double>(k + j + 1);
        sum += add;
        if (std::abs(add) < 1e-18) break;
        term *= kI * alpha / static_cast<double>(j + 1);
      }
      m[k] = sum;
    }
    return m;
  }
  const complex e = std::polar(1.0, alpha);
  const complex ia = kI * alpha;
  m[0] = (e - 1.0) / ia;
  for (int k = 1; k < 4; ++k) m[k] = (e - static_cast<double>(k) * m[k - 1]) / ia;
  return m;
}

// Monomial coefficients of the Lagrange basis polynomials on four nodes.
std::array<std::array<double, 4>, 4> lagrange_monomials(const std::array<double, 4>& x) {
  std::array<std::array<double, 4>, 4> c{};
  for (int m = 0; m < 4; ++m) {
    std::array<double, 4> p{1.0, 0.0, 0.0, 0.0};
    int degree = 0;
    double denom = 1.0;
    for (int n = 0; n < 4; ++n) {
      if (n == m) continue;
      // p <- p * (x - x_n)
      for (int k = degree + 1; k >= 1; --k) p[k] = p[k - 1] - x[n] * p[k];
      p[0] = -x[n] * p[0];
      ++degree;
      denom *= x[m] - x[n];
    }
    for (int k = 0; k < 4; ++k) c[m][k] = p[k] / denom;
  }
  return c;
}

std::array<complex, 4> stencil_weights(const std::array<double, 4>& nodes,
                                       const std::array<complex, 4>& moments, double dt) {
  const auto c = lagrange_monomials(nodes);
  std::array<complex, 4> w{};
  for (int m = 0; m < 4; ++m) {
    complex s{0.0, 0.0};
    for (int k = 0; k < 4; ++k) s += c[m][k] * moments[k];
    w[m] = dt * s;
  }
  return w;
}

std::array<double, 4> lagrange_values(const std::array<double, 4>& nodes, double x) {
  std::array<double, 4> v{};
  for (int m = 0; m < 4; ++m) {
    double p = 1.0;
    for (int n = 0; n < 4; ++n) {
      if (n != m) p *= (x - nodes[n]) / (nodes[m] - nodes[n]);
    }
    v[m] = p;
  }
  return v;
}

// Start index of the four-point stencil used for the interval [s_i, s_{i+1}].
std::size_t stencil_start(std::size_t i, std::size_t n) {
  if (i == 0) return 0;
  if (i + 2 >= n) return n - 4;
  return i - 1;
}

const std::array<complex, 4>& stencil_for(const OscillatoryRule& rule, std::size_t i,
                                          std::size_t n) {
  if (i == 0) return rule.first;
  if (i + 2 >= n) return rule.last;
  return rule.interior;
}

int worker_count() {
  if (const char* env = std::getenv("DEPHASE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(worker_count());
  if (workers <= 1 || count < 2) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t n = std::min(workers, count);
  std::vector<std::exception_ptr> errors(n);
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < count; k += n) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

CharacteristicField::CharacteristicField(const Grid& grid)
    : n_labels_(grid.label_count()),
      n_times_(grid.time_count()),
      deviation_(grid.label_count() * grid.time_count(), 0.0) {}

double CharacteristicField::theta_value(const Grid& grid, std::size_t i, std::size_t j,
                                        std::size_t l) const {
  return grid.theta(j) + grid.omega_nodes()[l].omega * grid.time(i) +
         deviation(grid.label_index(j, l), i);
}

bool CharacteristicField::compatible_with(const Grid& grid) const {
  return n_labels_ == grid.label_count() && n_times_ == grid.time_count();
}

OscillatoryRule::OscillatoryRule(double omega, double dt) {
  const auto moments = oscillatory_moments(omega * dt);
  first = stencil_weights({0.0, 1.0, 2.0, 3.0}, moments, dt);
  interior = stencil_weights({-1.0, 0.0, 1.0, 2.0}, moments, dt);
  last = stencil_weights({-2.0, -1.0, 0.0, 1.0}, moments, dt);
}

bool ContractionReport::ratios_within(double slack) const {
  return std::all_of(ratios.begin(), ratios.end(),
                     [&](double r) { return r <= predicted_factor * (1.0 + slack); });
}

bool ContractionReport::deviation_within(double slack) const {
  return deviation_norm <= deviation_bound * (1.0 + slack);
}

complex interpolate_path(std::span<const complex> values, double dt, double t) {
  const std::size_t n = values.size();
  if (n < 4) throw std::invalid_argument("interpolate_path needs at least 4 samples");
  const double x = t / dt;
  if (x < -1e-9 || x > static_cast<double>(n - 1) + 1e-9) {
    throw std::out_of_range("interpolate_path: t outside the grid");
  }
  auto i = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0, static_cast<double>(n - 2)));
  const std::size_t s = stencil_start(i, n);
  const std::array<double, 4> nodes{double(s), double(s + 1), double(s + 2), double(s + 3)};
  const auto w = lagrange_values(nodes, x);
  complex out{0.0, 0.0};
  for (int m = 0; m < 4; ++m) out += w[m] * values[s + m];
  return out;
}

CharacteristicSolver::CharacteristicSolver(const Grid& grid, WeightSpec weight)
    : grid_(grid), weight_(weight), zero_rule_(0.0, grid.dt()) {
  if (grid.time_count() < 4) throw std::invalid_argument("characteristic solver needs >= 4 time nodes");
  const auto& nodes = grid.omega_nodes();
  rules_.reserve(nodes.size());
  phasors_.resize(nodes.size());
  for (std::size_t l = 0; l < nodes.size(); ++l) {
    rules_.emplace_back(nodes[l].omega, grid.dt());
    phasors_[l].resize(grid.time_count());
    for (std::size_t i = 0; i < grid.time_count(); ++i) {
      phasors_[l][i] = std::polar(1.0, nodes[l].omega * grid.time(i));
    }
  }
  theta_phasors_.resize(grid.theta_count());
  for (std::size_t j = 0; j < grid.theta_count(); ++j) {
    theta_phasors_[j] = std::polar(1.0, grid.theta(j));
  }
}

void CharacteristicSolver::check_inputs(const OrderParameterPath& z_prev) const {
  if (z_prev.z.size() != grid_.time_count()) {
    throw GridMismatch(fmt::format("order parameter has {} samples, grid has {} times",
                                   z_prev.z.size(), grid_.time_count()));
  }
}

void CharacteristicSolver::forcing_integral(std::size_t label, std::span<const double> deviation,
                                            std::span<const complex> z_conj, double mu,
                                            std::span<complex> out) const {
  const std::size_t n = grid_.time_count();
  const std::size_t m_theta = grid_.theta_count();
  const std::size_t j = label % m_theta;
  const std::size_t l = label / m_theta;
  const auto& rule = rules_[l];
  const auto& phasor = phasors_[l];
  const complex e_theta = theta_phasors_[j];

  std::vector<complex> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = z_conj[i] * std::polar(1.0, deviation[i]);

  out[n - 1] = {0.0, 0.0};
  for (std::size_t i = n - 1; i-- > 0;) {
    const auto& w = stencil_for(rule, i, n);
    const std::size_t s = stencil_start(i, n);
    const complex local = w[0] * h[s] + w[1] * h[s + 1] + w[2] * h[s + 2] + w[3] * h[s + 3];
    out[i] = out[i + 1] + mu * (e_theta * phasor[i] * local);
  }
}

CharacteristicField CharacteristicSolver::apply_F(const CharacteristicField& theta,
                                                  const OrderParameterPath& z_prev,
                                                  double mu) const {
  check_inputs(z_prev);
  if (!theta.compatible_with(grid_)) throw GridMismatch("characteristic field does not match grid");
  CharacteristicField out(grid_);
  out.iterate = theta.iterate;
  if (mu == 0.0 || z_prev.identically_zero()) return out;

  std::vector<complex> z_conj(z_prev.z.size());
  for (std::size_t i = 0; i < z_conj.size(); ++i) z_conj[i] = std::conj(z_prev.z[i]);

  const std::size_t n = grid_.time_count();
  parallel_for(grid_.label_count(), [&](std::size_t label) {
    std::vector<complex> integral(n);
    forcing_integral(label, theta.trajectory(label), z_conj, mu, integral);
    auto dst = out.trajectory(label);
    for (std::size_t i = 0; i < n; ++i) dst[i] = integral[i].imag();
  });
  return out;
}

FixedPointResult CharacteristicSolver::solve_fixed_point(const OrderParameterPath& z_prev,
                                                         double mu, double tol,
                                                         int max_sweeps) const {
  check_inputs(z_prev);
  if (!(tol > 0.0)) throw std::invalid_argument("Picard tolerance must be > 0");
  const auto times = grid_.times();
  const WeightSpec dev = deviation_weight();
  const double r_norm = z_prev.norm(weight_);

  FixedPointResult result{CharacteristicField(grid_), {}};
  auto& rep = result.report;
  rep.predicted_factor = mu * tail_bound(0.0, r_norm, weight_);
  rep.deviation_bound = mu * deviation_bound_constant(weight_) * r_norm;
  rep.tail_bound = mu * tail_bound(grid_.t_max(), r_norm, weight_);
  if (!std::isfinite(rep.predicted_factor) || rep.predicted_factor >= 1.0) {
    throw NonContractive(
        fmt::format("predicted contraction factor {:.6g} >= 1; refusing to iterate",
                    rep.predicted_factor),
        rep.predicted_factor);
  }

  CharacteristicField current(grid_);
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    CharacteristicField next = apply_F(current, z_prev, mu);
    const auto a = next.values();
    const auto b = current.values();
    std::vector<double> diff(a.size());
    double sup = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      diff[k] = a[k] - b[k];
      sup = std::max(sup, std::abs(diff[k]));
    }
    const double inc = weighted_field_norm(diff, times, dev);
    const double next_norm = weighted_field_norm(a, times, dev);
    if (!rep.increments.empty()) {
      // Ratios whose denominator already sits at roundoff level carry no information.
      const double prev = rep.increments.back();
      if (prev > 1e-11 * next_norm && prev > 0.0) {
        rep.ratios.push_back(inc / prev);
        rep.max_ratio = std::max(rep.max_ratio, inc / prev);
      }
    }
    rep.residuals.push_back(sup);
    rep.increments.push_back(inc);
    current = std::move(next);
    rep.sweeps = sweep;
    if (!std::isfinite(sup)) break;
    if (sup < tol) {
      current.weighted_norm = next_norm;
      rep.deviation_norm = next_norm;
      result.field = std::move(current);
      return result;
    }
  }
  throw MaxSweepsExceeded(
      fmt::format("Picard residual {:.3e} still above {:.3e} after {} sweeps",
                  rep.residuals.empty() ? 0.0 : rep.residuals.back(), tol, max_sweeps),
      rep.residuals.empty() ? 0.0 : rep.residuals.back());
}

namespace {

// Backward RK4 on D' = -mu Im(C(t) e^{i(theta + D)}), C(t) = e^{i omega t} conj(z(t)),
// with C tabulated on the half-step lattice tau_q = q h / 2 (q = 0 at t = 0).
class LabelIntegrator {
 public:
  LabelIntegrator(const Grid& grid, double omega, std::span<const complex> z, double mu,
                  const OracleOptions& options)
      : mu_(mu), budget_(options.local_error_budget) {
    const double dt = grid.dt();
    sub_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(std::abs(omega) * dt / (2.0 * options.phase_step))));
    per_interval_ = 4 * sub_;  // fine step h = dt / (2 sub), half steps h / 2
    const std::size_t n = grid.time_count();
    const double quarter = dt / static_cast<double>(per_interval_);
    table_.resize((n - 1) * per_interval_ + 1);
    for (std::size_t q = 0; q < table_.size(); ++q) {
      const double t = std::min(static_cast<double>(q) * quarter, grid.t_max());
      table_[q] = std::polar(1.0, omega * t) * std::conj(interpolate_path(z, dt, t));
    }
    h_ = dt / static_cast<double>(2 * sub_);
    n_ = n;
  }

  std::vector<double> run(double theta) const {
    std::vector<double> d(n_, 0.0);
    double value = 0.0;
    for (std::size_t i = n_ - 1; i-- > 0;) {
      const std::size_t top = (i + 1) * per_interval_;
      const double fine = advance(value, theta, top, 2 * sub_, 1);
      const double coarse = advance(value, theta, top, sub_, 2);
      if (std::abs(fine - coarse) / 15.0 > budget_) {
        throw StepRejected(fmt::format(
            "RK4 local error estimate {:.3e} exceeds budget {:.3e} on interval {}",
            std::abs(fine - coarse) / 15.0, budget_, i));
      }
      value = fine;
      d[i] = value;
    }
    return d;
  }

 private:
  double rhs(std::size_t q, double theta, double dev) const {
    return -mu_ * std::imag(table_[q] * std::polar(1.0, theta + dev));
  }

  // `steps` RK4 steps backward from lattice index `top`; a step spans
  // 2 * half lattice cells.
  double advance(double value, double theta, std::size_t top, std::size_t steps,
                 std::size_t half) const {
    const double h = h_ * static_cast<double>(half);
    std::size_t q = top;
    for (std::size_t s = 0; s < steps; ++s) {
      const double k1 = rhs(q, theta, value);
      const double k2 = rhs(q - half, theta, value - 0.5 * h * k1);
      const double k3 = rhs(q - half, theta, value - 0.5 * h * k2);
      const double k4 = rhs(q - 2 * half, theta, value - h * k3);
      value -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      q -= 2 * half;
    }
    return value;
  }

  double mu_;
  double budget_;
  std::size_t sub_ = 1;
  std::size_t per_interval_ = 4;
  std::size_t n_ = 0;
  double h_ = 0.0;
  std::vector<complex> table_;
};

}  // namespace

std::vector<double> CharacteristicSolver::oracle_trajectory(double theta, double omega,
                                                            const OrderParameterPath& z_prev,
                                                            double mu,
                                                            const OracleOptions& options) const {
  check_inputs(z_prev);
  if (mu == 0.0 || z_prev.identically_zero()) return std::vector<double>(grid_.time_count(), 0.0);
  LabelIntegrator integrator(grid_, omega, z_prev.z, mu, options);
  return integrator.run(theta);
}

CharacteristicField CharacteristicSolver::backward_ode_oracle(const OrderParameterPath& z_prev,
                                                              double mu,
                                                              const OracleOptions& options) const {
  check_inputs(z_prev);
  CharacteristicField out(grid_);
  if (mu == 0.0 || z_prev.identically_zero()) return out;
  const std::size_t m_theta = grid_.theta_count();
  parallel_for(grid_.omega_count(), [&](std::size_t l) {
    LabelIntegrator integrator(grid_, grid_.omega_nodes()[l].omega, z_prev.z, mu, options);
    for (std::size_t j = 0; j < m_theta; ++j) {
      const auto d = integrator.run(grid_.theta(j));
      std::copy(d.begin(), d.end(), out.trajectory(grid_.label_index(j, l)).begin());
    }
  });
  out.weighted_norm = weighted_field_norm(out.values(), grid_.times(), deviation_weight());
  return out;
}

std::vector<double> CharacteristicSolver::beta(const OrderParameterPath& z) const {
  check_inputs(z);
  const std::size_t n = grid_.time_count();
  std::vector<double> r = z.moduli();
  std::vector<double> b(n, 0.0);
  for (std::size_t i = n - 1; i-- > 0;) {
    const auto& w = stencil_for(zero_rule_, i, n);
    const std::size_t s = stencil_start(i, n);
    double local = 0.0;
    for (int m = 0; m < 4; ++m) local += w[m].real() * r[s + m];
    b[i] = b[i + 1] + local;
  }
  return b;
}

GammaBetaReport CharacteristicSolver::gamma_beta_check(const CharacteristicField& field,
                                                       const OrderParameterPath& z_prev, double mu,
                                                       double slack) const {
  GammaBetaReport rep;
  const auto b = beta(z_prev);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) {
    if (b[i] < b[i + 1] * (1.0 - 1e-12)) rep.beta_nonincreasing = false;
  }
  if (mu == 0.0) return rep;
  const std::size_t n = grid_.time_count();
  for (std::size_t label = 0; label < field.label_count(); ++label) {
    const auto d = field.trajectory(label);
    for (std::size_t i = 0; i < n; ++i) {
      const double gamma = std::abs(d[i]) / mu;
      if (b[i] > 0.0) {
        rep.max_ratio = std::max(rep.max_ratio, gamma / b[i]);
      } else if (gamma > 0.0) {
        rep.max_ratio = std::max(rep.max_ratio, gamma > 1e-300 ? 2.0 : 0.0);
      }
    }
  }
  rep.passed = rep.beta_nonincreasing && rep.max_ratio <= 1.0 + slack;
  return rep;
}

CharacteristicField apply_F(const CharacteristicSolver& solver, const CharacteristicField& theta,
                            const OrderParameterPath& z_prev, double mu) {
  return solver.apply_F(theta, z_prev, mu);
}

FixedPointResult solve_fixed_point(const CharacteristicSolver& solver,
                                   const OrderParameterPath& z_prev, double mu, double tol,
                                   int max_sweeps) {
  return solver.solve_fixed_point(z_prev, mu, tol, max_sweeps);
}

CharacteristicField backward_ode_oracle(const CharacteristicSolver& solver,
                                        const OrderParameterPath& z_prev, double mu) {
  return solver.backward_ode_oracle(z_prev, mu);
}

}  // namespace dephase
