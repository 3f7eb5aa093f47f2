#include "dephase/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/core.h>

namespace dephase {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
  }
}

double positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("{} must be > 0, got {}", name, v));
  return v;
}

}  // namespace

AsymptoticState RunConfig::state() const {
  try {
    return AsymptoticState(frequency_profile(), modes, decay);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid state: ") + e.what());
  }
}

FrequencyProfile RunConfig::frequency_profile() const {
  return FrequencyProfile::make(profile, profile_parameter);
}

WeightSpec RunConfig::weight() const {
  return weight_kind == WeightKind::Exponential ? WeightSpec::exponential(weight_rate)
                                                : WeightSpec::polynomial(weight_rate);
}

Grid RunConfig::build_grid() const { return Grid::build(grid, frequency_profile()); }

DecayModelKind RunConfig::fit_kind() const {
  return weight_kind == WeightKind::Exponential ? DecayModelKind::Exponential
                                                : DecayModelKind::Polynomial;
}

RunConfig parse_config(const json& doc) {
  reject_unknown(doc, "config",
                 {"state", "grid", "mu", "weight", "tolerances", "fit", "particles", "output_dir"});
  RunConfig c;

  if (!doc.contains("state")) throw ConfigError("config.state is required");
  const json& st = doc.at("state");
  reject_unknown(st, "state", {"profile", "modes", "decay_class"});
  {
    const json& p = st.at("profile");
    reject_unknown(p, "state.profile", {"kind", "parameter"});
    try {
      c.profile = profile_kind_from_string(get_or<std::string>(p, "kind", "lorentzian", "state.profile"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    c.profile_parameter = positive(get_or(p, "parameter", 1.0, "state.profile"), "state.profile.parameter");
  }
  if (st.contains("modes")) {
    if (!st.at("modes").is_array()) throw ConfigError("state.modes must be an array");
    for (const auto& m : st.at("modes")) {
      reject_unknown(m, "state.modes[]", {"k", "re", "im"});
      Mode mode;
      mode.k = get_or(m, "k", 1, "state.modes[]");
      mode.amplitude = {get_or(m, "re", 0.0, "state.modes[]"), get_or(m, "im", 0.0, "state.modes[]")};
      c.modes.push_back(mode);
    }
  }
  if (st.contains("decay_class")) {
    const json& d = st.at("decay_class");
    reject_unknown(d, "state.decay_class", {"kind", "rate"});
    const auto kind = get_or<std::string>(d, "kind", "analytic", "state.decay_class");
    if (kind == "analytic") {
      c.decay.kind = DecayKind::Analytic;
    } else if (kind == "sobolev") {
      c.decay.kind = DecayKind::Sobolev;
    } else {
      throw ConfigError("state.decay_class.kind must be 'analytic' or 'sobolev'");
    }
    c.decay.rate = positive(get_or(d, "rate", 1.0, "state.decay_class"), "state.decay_class.rate");
  }

  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    reject_unknown(g, "grid", {"dt", "t_max", "theta_nodes", "omega_nodes", "omega_cutoff", "mass_tol"});
    c.grid.dt = positive(get_or(g, "dt", c.grid.dt, "grid"), "grid.dt");
    c.grid.t_max = positive(get_or(g, "t_max", c.grid.t_max, "grid"), "grid.t_max");
    c.grid.theta_nodes = get_or(g, "theta_nodes", c.grid.theta_nodes, "grid");
    c.grid.omega_nodes = get_or(g, "omega_nodes", c.grid.omega_nodes, "grid");
    c.grid.omega_cutoff = get_or(g, "omega_cutoff", c.grid.omega_cutoff, "grid");
    c.grid.mass_tol = positive(get_or(g, "mass_tol", c.grid.mass_tol, "grid"), "grid.mass_tol");
    if (c.grid.theta_nodes < 1 || c.grid.omega_nodes < 2) {
      throw ConfigError("grid.theta_nodes must be >= 1 and grid.omega_nodes >= 2");
    }
  }

  c.mu = get_or(doc, "mu", c.mu, "config");
  if (!(c.mu >= 0.0) || !std::isfinite(c.mu)) throw ConfigError("mu must be finite and >= 0");

  if (doc.contains("weight")) {
    const json& w = doc.at("weight");
    reject_unknown(w, "weight", {"kind", "rate"});
    const auto kind = get_or<std::string>(w, "kind", "exponential", "weight");
    if (kind == "exponential") {
      c.weight_kind = WeightKind::Exponential;
    } else if (kind == "polynomial") {
      c.weight_kind = WeightKind::Polynomial;
    } else {
      throw ConfigError("weight.kind must be 'exponential' or 'polynomial'");
    }
    c.weight_rate = positive(get_or(w, "rate", c.weight_rate, "weight"), "weight.rate");
    if (c.weight_kind == WeightKind::Polynomial && c.weight_rate < 2.0) {
      throw ConfigError("polynomial weight needs rate >= 2");
    }
  }

  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    reject_unknown(t, "tolerances", {"picard", "outer", "tail_budget", "max_sweeps", "max_outer", "quadrature"});
    c.outer.tol_picard = positive(get_or(t, "picard", c.outer.tol_picard, "tolerances"), "tolerances.picard");
    c.outer.tol_outer = positive(get_or(t, "outer", c.outer.tol_outer, "tolerances"), "tolerances.outer");
    c.outer.tail_budget =
        positive(get_or(t, "tail_budget", c.outer.tail_budget, "tolerances"), "tolerances.tail_budget");
    c.outer.max_sweeps = get_or(t, "max_sweeps", c.outer.max_sweeps, "tolerances");
    c.outer.max_outer = get_or(t, "max_outer", c.outer.max_outer, "tolerances");
    if (c.outer.max_sweeps < 1 || c.outer.max_outer < 1) {
      throw ConfigError("tolerances.max_sweeps and tolerances.max_outer must be >= 1");
    }
    const auto mode = get_or<std::string>(t, "quadrature", "split", "tolerances");
    if (mode == "split") {
      c.outer.mode = QuadratureMode::Split;
    } else if (mode == "direct") {
      c.outer.mode = QuadratureMode::Direct;
    } else {
      throw ConfigError("tolerances.quadrature must be 'split' or 'direct'");
    }
  }

  if (doc.contains("fit")) {
    const json& f = doc.at("fit");
    reject_unknown(f, "fit", {"window", "floor"});
    if (f.contains("window")) {
      const auto w = get_or<std::vector<double>>(f, "window", {}, "fit");
      if (w.size() != 2 || !(w[1] > w[0]) || w[0] < 0.0) {
        throw ConfigError("fit.window must be [t_a, t_b] with 0 <= t_a < t_b");
      }
      c.fit.window = {w[0], w[1]};
    }
    c.fit.floor = positive(get_or(f, "floor", c.fit.floor, "fit"), "fit.floor");
  }

  if (doc.contains("particles")) {
    const json& p = doc.at("particles");
    reject_unknown(p, "particles", {"n", "dt", "seed", "t_end"});
    const auto n = get_or<long long>(p, "n", static_cast<long long>(c.particles.n), "particles");
    if (n < 1) throw ConfigError("particles.n must be >= 1");
    c.particles.n = static_cast<std::size_t>(n);
    c.particles.dt = positive(get_or(p, "dt", c.particles.dt, "particles"), "particles.dt");
    c.particles.seed = get_or<std::uint64_t>(p, "seed", c.particles.seed, "particles");
    c.particles.t_end = positive(get_or(p, "t_end", c.particles.t_end, "particles"), "particles.t_end");
  }

  c.output_dir = get_or<std::string>(doc, "output_dir", c.output_dir, "config");

  const bool analytic = c.decay.kind == DecayKind::Analytic;
  if (analytic != (c.weight_kind == WeightKind::Exponential)) {
    c.warnings.push_back("weight kind does not match the declared decay class of the state");
  }
  if (c.weight_kind == WeightKind::Exponential && analytic && c.weight_rate > c.decay.rate) {
    c.warnings.push_back("exponential weight rate exceeds the declared analytic rate of the state");
  }
  c.echo = to_json(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json modes = json::array();
  for (const auto& m : c.modes) {
    modes.push_back({{"k", m.k}, {"re", m.amplitude.real()}, {"im", m.amplitude.imag()}});
  }
  return {
      {"state",
       {{"profile", {{"kind", to_string(c.profile)}, {"parameter", c.profile_parameter}}},
        {"modes", modes},
        {"decay_class",
         {{"kind", c.decay.kind == DecayKind::Analytic ? "analytic" : "sobolev"}, {"rate", c.decay.rate}}}}},
      {"grid",
       {{"dt", c.grid.dt},
        {"t_max", c.grid.t_max},
        {"theta_nodes", c.grid.theta_nodes},
        {"omega_nodes", c.grid.omega_nodes},
        {"omega_cutoff", c.grid.omega_cutoff},
        {"mass_tol", c.grid.mass_tol}}},
      {"mu", c.mu},
      {"weight",
       {{"kind", c.weight_kind == WeightKind::Exponential ? "exponential" : "polynomial"},
        {"rate", c.weight_rate}}},
      {"tolerances",
       {{"picard", c.outer.tol_picard},
        {"outer", c.outer.tol_outer},
        {"tail_budget", c.outer.tail_budget},
        {"max_sweeps", c.outer.max_sweeps},
        {"max_outer", c.outer.max_outer},
        {"quadrature", c.outer.mode == QuadratureMode::Split ? "split" : "direct"}}},
      {"fit", {{"window", {c.fit.window.t_a, c.fit.window.t_b}}, {"floor", c.fit.floor}}},
      {"particles",
       {{"n", c.particles.n}, {"dt", c.particles.dt}, {"seed", c.particles.seed}, {"t_end", c.particles.t_end}}},
      {"output_dir", c.output_dir},
  };
}

json default_lorentzian_config() {
  return json::parse(R"({
    "state": {
      "profile": {"kind": "lorentzian", "parameter": 1.0},
      "modes": [{"k": 1, "re": 0.05, "im": 0.0}],
      "decay_class": {"kind": "analytic", "rate": 1.0}
    },
    "grid": {"dt": 0.05, "t_max": 20.0, "theta_nodes": 64, "omega_nodes": 129},
    "mu": 0.05,
    "weight": {"kind": "exponential", "rate": 0.9},
    "tolerances": {"picard": 1e-13, "outer": 1e-10, "tail_budget": 1e-8, "max_sweeps": 200, "max_outer": 30},
    "fit": {"window": [2.0, 15.0], "floor": 1e-12},
    "particles": {"n": 10000, "dt": 0.01, "seed": 1, "t_end": 20.0},
    "output_dir": "out/lorentzian"
  })");
}

json default_laplace_config() {
  return json::parse(R"({
    "state": {
      "profile": {"kind": "laplace", "parameter": 1.0},
      "modes": [{"k": 1, "re": 0.05, "im": 0.0}],
      "decay_class": {"kind": "sobolev", "rate": 2.0}
    },
    "grid": {"dt": 0.05, "t_max": 40.0, "theta_nodes": 64, "omega_nodes": 129},
    "mu": 0.05,
    "weight": {"kind": "polynomial", "rate": 2.0},
    "tolerances": {"picard": 1e-13, "outer": 1e-10, "tail_budget": 1e-4, "max_sweeps": 200, "max_outer": 30},
    "fit": {"window": [5.0, 40.0], "floor": 1e-12},
    "particles": {"n": 10000, "dt": 0.01, "seed": 1, "t_end": 40.0},
    "output_dir": "out/laplace"
  })");
}

std::string resolve_output_dir(const RunConfig& config) {
  if (const char* env = std::getenv("DEPHASE_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

}  // namespace dephase
