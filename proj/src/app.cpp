#include "dephase/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "dephase/acceptance.hpp"

namespace dephase {

using nlohmann::json;

namespace {

constexpr double kMassTolerance = 1e-6;
constexpr double kOracleAbsolute = 1e-6;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Grid-aligned snapshot times inside [0, t_max].
std::vector<double> snapshot_times(const Grid& grid) {
  std::vector<double> out;
  for (double t : {0.0, 5.0, 10.0}) {
    if (t > grid.t_max() + 1e-12) continue;
    const double steps = t / grid.dt();
    if (std::abs(steps - std::round(steps)) < 1e-9) out.push_back(t);
  }
  return out;
}

json entry_json(const LedgerEntry& e) {
  const auto& c = e.contraction;
  return {
      {"n", e.n},
      {"z_norm", e.z_norm},
      {"r_sup", e.r_sup},
      {"prev_r_norm", e.prev_r_norm},
      {"dz_norm", e.dz_norm},
      {"cauchy_ratio", e.cauchy_ratio ? json(*e.cauchy_ratio) : json(nullptr)},
      {"contraction",
       {{"predicted_factor", c.predicted_factor},
        {"max_ratio", c.max_ratio},
        {"sweeps", c.sweeps},
        {"ratios", c.ratios},
        {"deviation_norm", c.deviation_norm},
        {"deviation_bound", c.deviation_bound}}},
      {"estimrn_ratio", e.estimrn_ratio},
      {"tail_bound", e.tail_bound},
      {"deviation_step", e.deviation_step},
      {"gamma_beta",
       {{"max_ratio", e.gamma_beta.max_ratio},
        {"beta_nonincreasing", e.gamma_beta.beta_nonincreasing},
        {"passed", e.gamma_beta.passed}}},
      {"finite", e.finite},
  };
}

json spectral_json(const SpectralSupremum& s) {
  return {{"analytic", s.analytic},
          {"sobolev_keta", s.sobolev_keta},
          {"sobolev_eta", s.sobolev_eta},
          {"eta_at_max", s.eta_at_max},
          {"finite", s.finite}};
}

json envelope_json(const EnvelopeCertificate& c) {
  return {{"c_min", c.c_min},
          {"t_at_max", c.t_at_max},
          {"head_max", c.head_max},
          {"tail_max", c.tail_max},
          {"passed", c.passed}};
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

void print_checks(const std::vector<Check>& checks, std::ostream& log) {
  for (const auto& c : checks) {
    fmt::print(log, "  {:<24} {}{}\n", c.name, c.passed ? "ok" : "FAILED",
               c.detail.empty() ? "" : "  " + c.detail);
  }
}

}  // namespace

bool KineticRun::passed() const {
  return outer.converged() &&
         std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

KineticRun solve_kinetic(const RunConfig& config, bool with_oracle) {
  const auto t0 = std::chrono::steady_clock::now();
  KineticRun run;
  run.config = config;
  run.state.emplace(config.state());
  run.grid.emplace(config.build_grid());
  const Grid& grid = *run.grid;
  const AsymptoticState& state = *run.state;
  require_quadrature(grid, state);

  const WeightSpec w = config.weight();
  const auto t_solve = std::chrono::steady_clock::now();
  run.outer = outer_solve(state, grid, config.mu, w, config.outer);
  run.solve_seconds = seconds_since(t_solve);
  for (double t : run.outer.z.times) run.r_free.push_back(std::abs(free_order_parameter(state, t)));

  auto& checks = run.checks;
  const auto& ledger = run.outer.ledger;
  checks.push_back({"outer_converged", run.outer.converged(),
                    fmt::format("{} after {} iterations", to_string(ledger.status), ledger.entries.size())});
  if (!run.outer.converged()) {
    run.seconds = seconds_since(t0);
    return run;
  }

  run.lemmas = verify_lemmas(ledger, w, config.mu);
  for (const auto& c : run.lemmas.checks) {
    checks.push_back({c.name, c.passed, fmt::format("worst {:.4g} {}", c.worst, c.detail)});
  }
  {
    bool bounded = true;
    std::string detail;
    for (const auto& s : run.lemmas.ratios) {
      bounded = bounded && s.bounded;
      detail += fmt::format("{} slope {:.3g}; ", s.name, s.slope);
    }
    checks.push_back({"generic_constants", bounded, detail});
  }

  CharacteristicSolver solver(grid, w);
  run.density = reconstruct(solver, run.outer.field, run.outer.z_drive, state, config.mu, snapshot_times(grid));
  {
    bool ok = true;
    std::string detail;
    for (const auto& s : run.density->snapshots) {
      const double err = s.mass_jacobian - 1.0;
      ok = ok && std::abs(err) <= kMassTolerance;
      detail += fmt::format("t={} {:+.2e}; ", s.t, err);
    }
    checks.push_back({"mass_conservation", ok, detail});
  }

  const std::vector<double> times = run.outer.z.times;
  const std::vector<double> r = run.outer.z.moduli();
  const std::vector<double>& dist = run.density->dephasing_distance;
  const double floor = config.fit.floor;
  const bool r_vanishes = std::all_of(r.begin(), r.end(), [&](double v) { return v <= floor; });
  if (r_vanishes) {
    run.fit_note = "order parameter below the fit floor everywhere";
    checks.push_back({"decay_fit", true, run.fit_note});
    checks.push_back({"envelope", true, run.fit_note});
    checks.push_back({"distance_envelope", true, run.fit_note});
  } else {
    try {
      run.fit = fit_decay(times, r, config.fit_kind(), config.fit.window, floor);
      checks.push_back({"decay_fit", true,
                        fmt::format("{} rate {:.6g}, residual {:.3g}", to_string(run.fit->kind),
                                    run.fit->rate, run.fit->residual)});
      run.envelope = certify_envelope(times, r, *run.fit, 0.5, floor);
      checks.push_back({"envelope", run.envelope.passed, fmt::format("C_min {:.6g}", run.envelope.c_min)});
      const bool flat = std::all_of(dist.begin(), dist.end(), [&](double v) { return v <= floor; });
      if (flat) {
        run.distance_envelope.passed = true;
        checks.push_back({"distance_envelope", true, "distance below the fit floor everywhere"});
      } else {
        run.distance_envelope = certify_envelope(times, dist, *run.fit, 0.5, floor);
        checks.push_back({"distance_envelope", run.distance_envelope.passed,
                          fmt::format("C_min {:.6g}", run.distance_envelope.c_min)});
      }
    } catch (const std::runtime_error& e) {
      run.fit_note = e.what();
      checks.push_back({"decay_fit", false, run.fit_note});
    }
  }

  if (with_oracle) {
    const auto oracle = solver.backward_ode_oracle(run.outer.z_drive, config.mu);
    double diff = 0.0;
    const auto a = oracle.values();
    const auto b = run.outer.field.values();
    for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, std::abs(a[k] - b[k]));
    run.oracle_difference = diff;
    run.oracle_budget = kOracleAbsolute + ledger.entries.back().tail_bound;
    checks.push_back({"oracle_agreement", diff <= run.oracle_budget,
                      fmt::format("sup diff {:.3e}, budget {:.3e}", diff, run.oracle_budget)});
  }
  run.seconds = seconds_since(t0);
  return run;
}

json ledger_json(const DiagnosticsLedger& ledger) {
  json entries = json::array();
  for (const auto& e : ledger.entries) entries.push_back(entry_json(e));
  return {{"schema_version", kSchemaVersion},
          {"weight", ledger.weight},
          {"mu", ledger.mu},
          {"status", to_string(ledger.status)},
          {"message", ledger.message},
          {"spectral_supremum", spectral_json(ledger.spectral)},
          {"entries", entries}};
}

json summary_json(const KineticRun& run) {
  const auto& ledger = run.outer.ledger;
  const auto& es = ledger.entries;
  const WeightSpec w = run.config.weight();

  json checks = json::array();
  for (const auto& c : run.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});

  json cauchy = json::array();
  json contraction = json::array();
  json bound_rows = json::array();
  json tails = json::array();
  double bound_worst = 0.0;
  bool bound_ok = true;
  for (const auto& e : es) {
    cauchy.push_back(e.cauchy_ratio ? json(*e.cauchy_ratio) : json(nullptr));
    contraction.push_back({{"n", e.n},
                           {"predicted_factor", e.contraction.predicted_factor},
                           {"max_ratio", e.contraction.max_ratio},
                           {"sweeps", e.contraction.sweeps},
                           {"within_bound", e.contraction.ratios_within(0.05)}});
    bound_rows.push_back({{"n", e.n},
                       {"deviation_norm", e.contraction.deviation_norm},
                       {"bound", e.contraction.deviation_bound},
                       {"ratio", e.estimrn_ratio}});
    bound_worst = std::max(bound_worst, e.estimrn_ratio);
    bound_ok = bound_ok && e.contraction.deviation_within(0.05);
    tails.push_back({{"n", e.n}, {"tail_bound", e.tail_bound}});
  }

  json lemma_checks = json::array();
  for (const auto& c : run.lemmas.checks) {
    lemma_checks.push_back({{"name", c.name},
                            {"explicit_constant", c.explicit_constant},
                            {"passed", c.passed},
                            {"worst", c.worst},
                            {"detail", c.detail}});
  }
  json series = json::array();
  for (const auto& s : run.lemmas.ratios) {
    series.push_back({{"name", s.name}, {"n", s.n}, {"ratio", s.ratio}, {"slope", s.slope}, {"bounded", s.bounded}});
  }

  json fit = nullptr;
  if (run.fit) {
    fit = {{"kind", to_string(run.fit->kind)},
           {"rate", run.fit->rate},
           {"amplitude", run.fit->amplitude},
           {"window", {run.fit->window.t_a, run.fit->window.t_b}},
           {"residual", run.fit->residual},
           {"points", run.fit->points}};
  }

  json mass = json::array();
  if (run.density) {
    for (const auto& s : run.density->snapshots) {
      mass.push_back({{"t", s.t}, {"jacobian", s.mass_jacobian}, {"physical", s.mass_physical}});
    }
  }

  const double deviation_norm = es.empty() ? 0.0 : es.back().contraction.deviation_norm;
  std::vector<double> r_free_c(run.r_free.begin(), run.r_free.end());
  return {
      {"schema_version", kSchemaVersion},
      {"status", to_string(ledger.status)},
      {"message", ledger.message},
      {"passed", run.passed()},
      {"checks", checks},
      {"warnings", run.config.warnings},
      {"seconds", run.seconds},
      {"config_echo", run.config.echo},
      {"norms",
       {{"weight", w.name()},
        {"iterations", es.size()},
        {"z", es.empty() ? 0.0 : es.back().z_norm},
        {"r_sup", es.empty() ? 0.0 : es.back().r_sup},
        {"z_free", weighted_norm(std::span<const double>(r_free_c), run.outer.z.times, w)},
        {"deviation", deviation_norm},
        {"spectral_supremum", spectral_json(ledger.spectral)}}},
      {"cauchy_ratios", cauchy},
      {"contraction", contraction},
      {"estimrn_check", {{"entries", bound_rows}, {"worst", bound_worst}, {"passed", bound_ok}}},
      {"lemma_ratios", {{"checks", lemma_checks}, {"series", series}, {"passed", run.lemmas.passed}}},
      {"decay_fit", fit},
      {"envelope",
       {{"order_parameter", envelope_json(run.envelope)},
        {"dephasing_distance", envelope_json(run.distance_envelope)},
        {"note", run.fit_note}}},
      {"tail_bounds", {{"entries", tails}, {"final", es.empty() ? 0.0 : es.back().tail_bound}}},
      {"mass", mass},
      {"oracle",
       run.oracle_difference
           ? json{{"difference", *run.oracle_difference}, {"budget", run.oracle_budget}}
           : json(nullptr)},
  };
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("write_csv: header/column mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      fmt::print(out, "{}{:.16e}", c ? "," : "", columns[c][i]);
    }
    out << '\n';
  }
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return columns[c];
  }
  throw std::invalid_argument("no column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  table.columns.resize(table.header.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= table.columns.size()) throw std::runtime_error(fmt::format("{}:{}: too many cells", path, row));
      try {
        table.columns[c].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(fmt::format("{}:{}: bad number '{}'", path, row, cell));
      }
      ++c;
    }
    if (c != table.columns.size()) throw std::runtime_error(fmt::format("{}:{}: too few cells", path, row));
  }
  return table;
}

void write_solve_artifacts(const KineticRun& run, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto& z = run.outer.z;
  std::vector<double> re, im, r, dist, dist_col;
  for (const auto& v : z.z) {
    re.push_back(v.real());
    im.push_back(v.imag());
    r.push_back(std::abs(v));
  }
  if (run.density) {
    dist = run.density->dephasing_distance;
  } else {
    dist.assign(z.size(), std::nan(""));
  }
  if (!z.z.empty()) {
    write_csv(dir + "/order_parameter.csv", {"t", "re_z", "im_z", "R", "distance"}, {z.times, re, im, r, dist});
    write_csv(dir + "/dephasing.csv", {"t", "distance", "R", "R_free"}, {z.times, dist, r, run.r_free});
  }
  write_json(dir + "/ledger.json", ledger_json(run.outer.ledger));
  write_json(dir + "/summary.json", summary_json(run));
}

int run_solve(const RunConfig& config, std::ostream& log) {
  for (const auto& w : config.warnings) fmt::print(log, "warning: {}\n", w);
  KineticRun run;
  try {
    run = solve_kinetic(config, false);
  } catch (const ConfigError& e) {
    fmt::print(log, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const QuadratureError& e) {
    fmt::print(log, "quadrature error: {}\n", e.what());
    return kExitConfig;
  }
  const std::string dir = resolve_output_dir(config);
  write_solve_artifacts(run, dir);

  const auto& ledger = run.outer.ledger;
  fmt::print(log, "solve: {} ({} iterations, {:.1f} s) -> {}\n", to_string(ledger.status),
             ledger.entries.size(), run.seconds, dir);
  if (!ledger.message.empty()) fmt::print(log, "  {}\n", ledger.message);
  print_checks(run.checks, log);
  if (ledger.status == OuterStatus::NotConverging || ledger.status == OuterStatus::NonContractive) {
    return kExitNotConverging;
  }
  return run.passed() ? kExitOk : kExitCheckFailed;
}

int run_simulate(const RunConfig& config, const SimulateOptions& options, std::ostream& log) {
  if (options.record_every < 1) {
    fmt::print(log, "config error: record_every must be >= 1\n");
    return kExitConfig;
  }
  KineticRun run;
  try {
    run.state.emplace(config.state());
    run.grid.emplace(config.build_grid());
    require_quadrature(*run.grid, *run.state);
  } catch (const ConfigError& e) {
    fmt::print(log, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const QuadratureError& e) {
    fmt::print(log, "quadrature error: {}\n", e.what());
    return kExitConfig;
  }
  const auto outer = outer_solve(*run.state, *run.grid, config.mu, config.weight(), config.outer);
  if (!outer.converged()) {
    fmt::print(log, "simulate: kinetic solve {}: {}\n", to_string(outer.ledger.status), outer.ledger.message);
    return kExitNotConverging;
  }

  const auto& p = config.particles;
  const auto init = init_from_solution(outer.field, *run.grid, *run.state, config.mu, p.n, p.seed);
  const double t_end = std::min(p.t_end, run.grid->t_max());
  const auto trace = simulate(init.ensemble, p.dt, t_end, options.record_every);

  std::vector<double> rn, phi;
  for (const auto& z : trace.z) {
    rn.push_back(std::abs(z));
    phi.push_back(std::abs(z) > kPhaseFloor ? std::arg(z) : std::nan(""));
  }
  const std::string dir = resolve_output_dir(config);
  std::filesystem::create_directories(dir);
  write_csv(dir + "/particles.csv", {"t", "R_N", "phi_N"}, {trace.t, rn, phi});
  fmt::print(log, "simulate: N={} seed={} dt={} t_end={} resampled={} -> {}/particles.csv\n", p.n, p.seed, p.dt,
             t_end, init.resampled, dir);

  if (options.kinetic_csv) {
    CsvTable kinetic;
    try {
      kinetic = read_csv(*options.kinetic_csv);
    } catch (const std::exception& e) {
      fmt::print(log, "kinetic csv: {}\n", e.what());
      return kExitConfig;
    }
    const auto& kt = kinetic.column("t");
    const auto& kr = kinetic.column("R");
    if (kt.size() < 2) {
      fmt::print(log, "kinetic csv: need at least two rows\n");
      return kExitConfig;
    }
    std::vector<double> t_out, rk, rp, diff;
    double sup = 0.0;
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
      const double t = trace.t[i];
      if (t < kt.front() - 1e-12 || t > kt.back() + 1e-12) continue;
      auto it = std::lower_bound(kt.begin(), kt.end(), t - 1e-12);
      const std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - kt.begin()), 1, kt.size() - 1);
      const double a = std::clamp((t - kt[hi - 1]) / (kt[hi] - kt[hi - 1]), 0.0, 1.0);
      const double r = (1.0 - a) * kr[hi - 1] + a * kr[hi];
      t_out.push_back(t);
      rk.push_back(r);
      rp.push_back(rn[i]);
      diff.push_back(rn[i] - r);
      sup = std::max(sup, std::abs(rn[i] - r));
    }
    write_csv(dir + "/comparison.csv", {"t", "R_kinetic", "R_N", "difference"}, {t_out, rk, rp, diff});
    fmt::print(log, "  sup |R_N - R| = {:.4e} over {} rows -> {}/comparison.csv\n", sup, t_out.size(), dir);
  }
  return kExitOk;
}

int run_fit(const FitOptions& options, std::ostream& log) {
  CsvTable table;
  try {
    table = read_csv(options.csv);
    const auto model =
        fit_decay(table.column("t"), table.column(options.column), options.kind, options.window, options.floor);
    const auto env = certify_envelope(table.column("t"), table.column(options.column), model, 0.5, options.floor);
    fmt::print(log, "fit {} [{}, {}]: rate {:.10g} amplitude {:.10g} residual {:.3e} points {}\n",
               to_string(model.kind), model.window.t_a, model.window.t_b, model.rate, model.amplitude,
               model.residual, model.points);
    fmt::print(log, "envelope: C_min {:.10g} at t={} head {:.6g} tail {:.6g} -> {}\n", env.c_min, env.t_at_max,
               env.head_max, env.tail_max, env.passed ? "certified" : "not certified");
    return env.passed ? kExitOk : kExitCheckFailed;
  } catch (const InsufficientData& e) {
    fmt::print(log, "fit: {}\n", e.what());
    return kExitCheckFailed;
  } catch (const NonPositiveValues& e) {
    fmt::print(log, "fit: {}\n", e.what());
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    fmt::print(log, "fit input: {}\n", e.what());
    return kExitConfig;
  }
}

int run_verify(const VerifyOptions& options, std::ostream& log) {
  bool preflight_ok = true;
  for (const auto& path : options.configs) {
    try {
      const auto config = load_config(path);
      const auto report = check_quadrature(config.build_grid(), config.state());
      if (!report.passed) throw QuadratureError(report.message);
      fmt::print(log, "preflight {}: ok (mass error {:.2e})\n", path, report.mass_error);
    } catch (const std::exception& e) {
      fmt::print(log, "preflight {}: FAILED {}\n", path, e.what());
      preflight_ok = false;
    }
  }
  if (!preflight_ok) return kExitConfig;

  AcceptanceOptions acc;
  acc.only = options.criteria;
  acc.progress = &log;
  const auto results = run_acceptance(acc);
  const bool all = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });

  const Check det = determinism_check();
  fmt::print(log, "{}\n", format_line({0, det.name, det.passed, det.detail, 0.0}));
  return all && det.passed ? kExitOk : kExitCheckFailed;
}

}  // namespace dephase
