#include "dephase/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

namespace dephase {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Below this the weighted increment of z is roundoff and ratios built on it are noise.
constexpr double kIncrementFloor = 1e-14;

bool all_finite(const OrderParameterPath& z) {
  return std::all_of(z.z.begin(), z.z.end(),
                     [](const complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

std::vector<double> theta_factors(const Grid& grid, const AsymptoticState& state) {
  std::vector<double> f(grid.theta_count());
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = state.theta_factor(grid.theta(j));
  return f;
}

double field_difference_norm(const CharacteristicField& a, const CharacteristicField& b,
                             std::span<const double> times, const WeightSpec& w) {
  const auto va = a.values();
  const auto vb = b.values();
  std::vector<double> d(va.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = va[k] - vb[k];
  return weighted_field_norm(d, times, w);
}

std::size_t snap_time(const Grid& grid, double t) {
  const double x = t / grid.dt();
  const double r = std::round(x);
  if (r < 0.0 || r > static_cast<double>(grid.time_count() - 1) ||
      std::abs(x - r) > 1e-9 * std::max(1.0, x)) {
    throw std::out_of_range(fmt::format("requested time {} is not a grid node", t));
  }
  return static_cast<std::size_t>(r);
}

// d/dtheta of a real periodic sample by DFT, Nyquist mode dropped.
std::vector<double> spectral_derivative(const std::vector<double>& v) {
  const std::size_t m = v.size();
  std::vector<double> out(m, 0.0);
  const std::size_t kmax = (m - 1) / 2;
  for (std::size_t k = 1; k <= kmax; ++k) {
    complex c{0.0, 0.0};
    for (std::size_t j = 0; j < m; ++j) {
      c += v[j] * std::polar(1.0, -kTwoPi * static_cast<double>(k * j % m) / static_cast<double>(m));
    }
    c /= static_cast<double>(m);
    // derivative of c e^{ik theta} + conj(c) e^{-ik theta}
    for (std::size_t j = 0; j < m; ++j) {
      const complex e = std::polar(1.0, kTwoPi * static_cast<double>(k * j % m) / static_cast<double>(m));
      out[j] += 2.0 * std::real(complex(0.0, static_cast<double>(k)) * c * e);
    }
  }
  return out;
}

}  // namespace

std::string to_string(OuterStatus status) {
  switch (status) {
    case OuterStatus::Converged: return "converged";
    case OuterStatus::MaxIterations: return "max_iterations";
    case OuterStatus::NotConverging: return "not_converging";
    case OuterStatus::NonContractive: return "non_contractive";
    case OuterStatus::TailBudgetExceeded: return "tail_budget_exceeded";
  }
  return "unknown";
}

OrderParameterPath order_parameter_of(const CharacteristicField& theta, const AsymptoticState& state,
                                      const Grid& grid, QuadratureMode mode) {
  if (!theta.compatible_with(grid)) throw GridMismatch("characteristic field does not match grid");
  require_quadrature(grid, state);

  const std::size_t n = grid.time_count();
  const std::size_t m_theta = grid.theta_count();
  const auto& nodes = grid.omega_nodes();
  const auto tf = theta_factors(grid, state);
  std::vector<complex> e_theta(m_theta);
  for (std::size_t j = 0; j < m_theta; ++j) e_theta[j] = std::polar(1.0, grid.theta(j));

  // Per-omega partial sums, reduced below in fixed order.
  std::vector<std::vector<complex>> partial(nodes.size(), std::vector<complex>(n));
  parallel_for(nodes.size(), [&](std::size_t l) {
    auto& acc = partial[l];
    const double scale = nodes[l].mass / static_cast<double>(m_theta);
    for (std::size_t j = 0; j < m_theta; ++j) {
      const auto d = theta.trajectory(grid.label_index(j, l));
      const complex a = scale * tf[j] * e_theta[j];
      for (std::size_t i = 0; i < n; ++i) {
        const complex phase = std::polar(1.0, nodes[l].omega * grid.time(i));
        if (mode == QuadratureMode::Split) {
          // e^{iD} - 1 without cancellation
          const double h = 0.5 * d[i];
          acc[i] += a * phase * complex(0.0, 2.0 * std::sin(h)) * std::polar(1.0, h);
        } else {
          acc[i] += a * phase * std::polar(1.0, d[i]);
        }
      }
    }
  });

  OrderParameterPath z = OrderParameterPath::zeros(grid);
  for (std::size_t i = 0; i < n; ++i) {
    complex s = mode == QuadratureMode::Split ? free_order_parameter(state, grid.time(i)) : complex{};
    for (std::size_t l = 0; l < nodes.size(); ++l) s += partial[l][i];
    z.z[i] = s;
  }
  return z;
}

OuterResult outer_solve(const AsymptoticState& state, const Grid& grid, double mu,
                        const WeightSpec& w, const OuterOptions& options) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be finite and >= 0");
  if (!(options.tol_outer > 0.0) || !(options.tol_picard > 0.0) || options.max_outer < 1) {
    throw std::invalid_argument("outer_solve: tolerances must be > 0 and max_outer >= 1");
  }
  require_quadrature(grid, state);

  const CharacteristicSolver solver(grid, w);
  const auto times = grid.times();
  const WeightSpec dev = w.deviation_weight();

  OuterResult result;
  auto& ledger = result.ledger;
  ledger.weight = w.name();
  ledger.mu = mu;
  const double lambda = w.kind() == WeightKind::Exponential ? w.rate() : state.decay().rate;
  const double gamma = w.kind() == WeightKind::Polynomial ? w.rate() : 2.0;
  ledger.spectral = spectral_supremum(state, lambda, gamma);

  OrderParameterPath z_prev = OrderParameterPath::zeros(grid);
  CharacteristicField d_prev(grid);
  result.z = z_prev;
  result.z_drive = z_prev;
  result.field = d_prev;
  int strikes = 0;
  ledger.status = OuterStatus::MaxIterations;
  ledger.message = fmt::format("no convergence within {} outer iterations", options.max_outer);

  for (int n = 1; n <= options.max_outer; ++n) {
    LedgerEntry e;
    e.n = n;
    e.prev_r_norm = z_prev.norm(w);

    FixedPointResult fp;
    try {
      fp = solver.solve_fixed_point(z_prev, mu, options.tol_picard, options.max_sweeps);
    } catch (const NonContractive& ex) {
      // A refused contraction after a Cauchy-ratio failure is the divergence itself.
      ledger.status = strikes > 0 ? OuterStatus::NotConverging : OuterStatus::NonContractive;
      ledger.message = fmt::format("iterate {}: {}", n, ex.what());
      break;
    } catch (const MaxSweepsExceeded& ex) {
      ledger.status = OuterStatus::NotConverging;
      ledger.message = fmt::format("iterate {}: {}", n, ex.what());
      break;
    }
    fp.field.iterate = n;

    OrderParameterPath z_n = order_parameter_of(fp.field, state, grid, options.mode);
    e.contraction = fp.report;
    e.tail_bound = fp.report.tail_bound;
    e.estimrn_ratio = fp.report.deviation_bound > 0.0
                          ? fp.report.deviation_norm / fp.report.deviation_bound
                          : 0.0;
    e.deviation_step = field_difference_norm(fp.field, d_prev, times, dev);
    e.gamma_beta = solver.gamma_beta_check(fp.field, z_prev, mu);
    e.finite = all_finite(z_n);
    if (!e.finite) {
      ledger.status = OuterStatus::NotConverging;
      ledger.message = fmt::format("iterate {}: non-finite order parameter", n);
      break;
    }
    e.z_norm = z_n.norm(w);
    const auto r = z_n.moduli();
    e.r_sup = *std::max_element(r.begin(), r.end());
    e.dz_norm = difference(z_n, z_prev).norm(w);
    if (!ledger.entries.empty() && ledger.entries.back().dz_norm > kIncrementFloor) {
      e.cauchy_ratio = e.dz_norm / ledger.entries.back().dz_norm;
      strikes = *e.cauchy_ratio >= 1.0 ? strikes + 1 : 0;
    }
    ledger.entries.push_back(e);

    result.z_drive = z_prev;
    result.z = z_n;
    result.field = fp.field;

    if (strikes >= 2) {
      ledger.status = OuterStatus::NotConverging;
      ledger.message = fmt::format("iterate {}: Cauchy ratio >= 1 twice in a row", n);
      break;
    }
    if (e.tail_bound > options.tail_budget) {
      ledger.status = OuterStatus::TailBudgetExceeded;
      ledger.message = fmt::format("iterate {}: truncation tail {:.3e} exceeds budget {:.3e}", n,
                                   e.tail_bound, options.tail_budget);
      break;
    }
    // With mu = 0 the map z_{n-1} -> z_n is constant, so z_1 is the fixed point.
    if (e.dz_norm < options.tol_outer || mu == 0.0) {
      ledger.status = OuterStatus::Converged;
      ledger.message = fmt::format("converged after {} iterations", n);
      break;
    }
    z_prev = std::move(z_n);
    d_prev = fp.field;
  }
  return result;
}

ReconstructedDensity reconstruct(const CharacteristicSolver& solver, const CharacteristicField& theta,
                                 const OrderParameterPath& z_drive, const AsymptoticState& state,
                                 double mu, const std::vector<double>& times) {
  const Grid& grid = solver.grid();
  if (!theta.compatible_with(grid)) throw GridMismatch("characteristic field does not match grid");
  if (z_drive.z.size() != grid.time_count()) throw GridMismatch("order parameter does not match grid");

  std::vector<std::size_t> idx;
  for (double t : times) idx.push_back(snap_time(grid, t));

  const std::size_t n = grid.time_count();
  const std::size_t m_theta = grid.theta_count();
  const auto& nodes = grid.omega_nodes();
  const auto tf = theta_factors(grid, state);
  std::vector<complex> z_conj(n);
  for (std::size_t i = 0; i < n; ++i) z_conj[i] = std::conj(z_drive.z[i]);

  std::vector<std::vector<double>> dist(nodes.size(), std::vector<double>(n, 0.0));
  std::vector<double> min_ratio(nodes.size(), 1.0);
  // exponent J = Re I at the requested times, [snapshot][label]
  std::vector<std::vector<double>> exponent(idx.size(), std::vector<double>(grid.label_count(), 0.0));

  parallel_for(nodes.size(), [&](std::size_t l) {
    std::vector<complex> integral(n);
    for (std::size_t j = 0; j < m_theta; ++j) {
      const std::size_t label = grid.label_index(j, l);
      const auto d = theta.trajectory(label);
      if (mu != 0.0) solver.forcing_integral(label, d, z_conj, mu, integral);
      const double f_inf = state.density(grid.theta(j), nodes[l].omega);
      for (std::size_t i = 0; i < n; ++i) {
        const double jac = mu != 0.0 ? integral[i].real() : 0.0;
        const double factor = std::exp(-jac);
        const double f = f_inf * factor;
        const double free = state.density(grid.theta(j) + d[i], nodes[l].omega);
        dist[l][i] = std::max(dist[l][i], std::abs(f - free));
        min_ratio[l] = std::min(min_ratio[l], factor);
      }
      for (std::size_t s = 0; s < idx.size(); ++s) {
        exponent[s][label] = mu != 0.0 ? integral[idx[s]].real() : 0.0;
      }
    }
  });

  ReconstructedDensity out;
  out.times = grid.times();
  out.dephasing_distance.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < nodes.size(); ++l) {
      out.dephasing_distance[i] = std::max(out.dephasing_distance[i], dist[l][i]);
    }
  }
  out.min_density_ratio = *std::min_element(min_ratio.begin(), min_ratio.end());

  for (std::size_t s = 0; s < idx.size(); ++s) {
    DensitySnapshot snap;
    snap.time_index = idx[s];
    snap.t = grid.time(idx[s]);
    snap.density.resize(grid.label_count());
    snap.free.resize(grid.label_count());
    double mass_a = 0.0;
    double mass_b = 0.0;
    for (std::size_t l = 0; l < nodes.size(); ++l) {
      std::vector<double> d(m_theta), h(m_theta);
      for (std::size_t j = 0; j < m_theta; ++j) {
        const std::size_t label = grid.label_index(j, l);
        d[j] = theta.deviation(label, idx[s]);
        h[j] = tf[j] * std::exp(-exponent[s][label]);
        snap.density[label] = state.density(grid.theta(j), nodes[l].omega) * std::exp(-exponent[s][label]);
        snap.free[label] = state.density(grid.theta(j) + d[j], nodes[l].omega);
      }
      const auto dd = spectral_derivative(d);
      double line_a = 0.0;
      double line_b = 0.0;
      for (std::size_t j = 0; j < m_theta; ++j) {
        line_a += h[j] * (1.0 + dd[j]);
        const std::size_t jn = (j + 1) % m_theta;
        const double x0 = grid.theta(j) + d[j];
        const double x1 = (jn == 0 ? kTwoPi : grid.theta(jn)) + d[jn];
        line_b += 0.5 * (h[j] + h[jn]) * (x1 - x0);
      }
      mass_a += nodes[l].mass * line_a / static_cast<double>(m_theta);
      mass_b += nodes[l].mass * line_b / kTwoPi;
    }
    snap.mass_jacobian = mass_a;
    snap.mass_physical = mass_b;
    out.snapshots.push_back(std::move(snap));
  }
  return out;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("least_squares_slope: size mismatch");
  if (x.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

LemmaReport verify_lemmas(const DiagnosticsLedger& ledger, const WeightSpec& w, double mu,
                          double slack, double slope_limit) {
  LemmaReport rep;
  const auto& es = ledger.entries;
  const bool exponential = w.kind() == WeightKind::Exponential;
  const double k_dev = deviation_bound_constant(w);

  LemmaCheck contraction{"contraction_factor", true, true, 0.0, ""};
  LemmaCheck bound_check{"deviation_bound", true, true, 0.0, ""};
  LemmaCheck gamma_beta{"gamma_beta", true, true, 0.0, ""};
  for (const auto& e : es) {
    const auto& c = e.contraction;
    if (c.predicted_factor > 0.0) {
      contraction.worst = std::max(contraction.worst, c.max_ratio / c.predicted_factor);
    }
    if (!c.ratios_within(slack)) {
      contraction.passed = false;
      contraction.detail += fmt::format("n={} ratio {:.4g} > factor {:.4g}; ", e.n, c.max_ratio,
                                        c.predicted_factor);
    }
    bound_check.worst = std::max(bound_check.worst, e.estimrn_ratio);
    if (!c.deviation_within(slack)) {
      bound_check.passed = false;
      bound_check.detail += fmt::format("n={} ||D|| {:.4g} > bound {:.4g}; ", e.n, c.deviation_norm,
                                    c.deviation_bound);
    }
    gamma_beta.worst = std::max(gamma_beta.worst, e.gamma_beta.max_ratio);
    if (!e.gamma_beta.passed) {
      gamma_beta.passed = false;
      gamma_beta.detail += fmt::format("n={} |Gamma|/beta {:.4g}; ", e.n, e.gamma_beta.max_ratio);
    }
  }
  rep.checks.push_back(contraction);
  rep.checks.push_back(bound_check);
  rep.checks.push_back(gamma_beta);

  if (exponential) {
    LemmaCheck step_check{"deviation_step", true, true, 0.0, ""};
    for (std::size_t k = 1; k < es.size(); ++k) {
      const double q = mu * k_dev * es[k].prev_r_norm;
      if (q >= 1.0) {
        step_check.passed = false;
        step_check.detail += fmt::format("n={} denominator not positive; ", es[k].n);
        continue;
      }
      const double bound = mu * k_dev * es[k - 1].dz_norm / (1.0 - q);
      if (bound > 0.0) step_check.worst = std::max(step_check.worst, es[k].deviation_step / bound);
      if (es[k].deviation_step > bound * (1.0 + slack)) {
        step_check.passed = false;
        step_check.detail += fmt::format("n={} step {:.4g} > bound {:.4g}; ", es[k].n,
                                      es[k].deviation_step, bound);
      }
    }
    rep.checks.push_back(step_check);
  }

  auto add_series = [&](RatioSeries s) {
    std::vector<double> x(s.n.begin(), s.n.end());
    s.slope = least_squares_slope(x, s.ratio);
    s.bounded = std::all_of(s.ratio.begin(), s.ratio.end(), [](double r) { return std::isfinite(r); }) &&
                s.slope <= slope_limit;
    rep.ratios.push_back(std::move(s));
  };

  const auto& sp = ledger.spectral;
  if (exponential) {
    RatioSeries growth{"order_parameter_growth", {}, {}, 0.0, true};
    RatioSeries increment{"outer_increment", {}, {}, 0.0, true};
    for (std::size_t k = 0; k < es.size(); ++k) {
      const double denom = es[k].prev_r_norm + sp.analytic;
      if (denom > 0.0) {
        growth.n.push_back(es[k].n);
        growth.ratio.push_back(es[k].z_norm / denom);
      }
      if (k >= 1 && mu > 0.0 && es[k - 1].dz_norm > kIncrementFloor) {
        const double q = mu * k_dev * es[k].prev_r_norm;
        if (q < 1.0) {
          increment.n.push_back(es[k].n);
          increment.ratio.push_back(es[k].dz_norm / (mu * k_dev * es[k - 1].dz_norm / (1.0 - q)));
        }
      }
    }
    add_series(std::move(growth));
    add_series(std::move(increment));
  } else {
    RatioSeries poly_growth{"poly_order_parameter", {}, {}, 0.0, true};
    RatioSeries poly_step{"poly_deviation_step", {}, {}, 0.0, true};
    RatioSeries poly_increment{"poly_outer_increment", {}, {}, 0.0, true};
    double m_bound = sp.sobolev_eta;
    for (const auto& e : es) m_bound = std::max(m_bound, e.z_norm);
    for (std::size_t k = 0; k < es.size(); ++k) {
      const double r = es[k].prev_r_norm;
      const double denom = sp.sobolev_eta + mu * r + mu * mu * r * r;
      if (denom > 0.0) {
        poly_growth.n.push_back(es[k].n);
        poly_growth.ratio.push_back(es[k].z_norm / denom);
      }
      if (k >= 1 && mu > 0.0 && es[k - 1].dz_norm > kIncrementFloor) {
        poly_step.n.push_back(es[k].n);
        poly_step.ratio.push_back(es[k].deviation_step / mu / es[k - 1].dz_norm);
        poly_increment.n.push_back(es[k].n);
        poly_increment.ratio.push_back(es[k].dz_norm / (m_bound * (mu + mu * mu) * es[k - 1].dz_norm));
      }
    }
    add_series(std::move(poly_growth));
    add_series(std::move(poly_step));
    add_series(std::move(poly_increment));
  }

  rep.passed = std::all_of(rep.checks.begin(), rep.checks.end(), [](const auto& c) { return c.passed; }) &&
               std::all_of(rep.ratios.begin(), rep.ratios.end(), [](const auto& s) { return s.bounded; });
  return rep;
}

}  // namespace dephase
