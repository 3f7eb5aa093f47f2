#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "dephase/app.hpp"
#include "dephase/config.hpp"

using namespace dephase;
using nlohmann::json;

namespace {

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dephase_test_" + name);
  std::filesystem::remove_all(dir);
  return dir.string();
}

json small_config(const std::string& out, double mu) {
  auto doc = default_lorentzian_config();
  doc["grid"]["t_max"] = 10.0;
  doc["grid"]["theta_nodes"] = 16;
  doc["grid"]["omega_nodes"] = 33;
  doc["fit"]["window"] = {2.0, 8.0};
  doc["mu"] = mu;
  doc["tolerances"]["tail_budget"] = mu > 1.0 ? 1e300 : 1e-4;
  doc["output_dir"] = out;
  return doc;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

}  // namespace

TEST_CASE("built-in configs parse and round-trip") {
  for (const auto& doc : {default_lorentzian_config(), default_laplace_config()}) {
    const auto c = parse_config(doc);
    CHECK(c.warnings.empty());
    const auto again = parse_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
  }
  const auto lap = parse_config(default_laplace_config());
  CHECK(lap.profile == ProfileKind::Laplace);
  CHECK(lap.weight_kind == WeightKind::Polynomial);
  CHECK(lap.grid.t_max == 40.0);
  CHECK(lap.fit_kind() == DecayModelKind::Polynomial);
}

TEST_CASE("shipped config files match the built-in defaults") {
  const std::string root = DEPHASE_SOURCE_DIR;
  CHECK(to_json(load_config(root + "/configs/lorentzian.json")) == to_json(parse_config(default_lorentzian_config())));
  CHECK(to_json(load_config(root + "/configs/laplace.json")) == to_json(parse_config(default_laplace_config())));
}

TEST_CASE("config validation") {
  auto doc = default_lorentzian_config();
  doc["grid"]["dtt"] = 0.1;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = default_lorentzian_config();
  doc["tolerances"]["picard"] = 0.0;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = default_lorentzian_config();
  doc["mu"] = -1.0;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = default_lorentzian_config();
  doc["weight"]["kind"] = "gaussian";
  CHECK_THROWS_AS(parse_config(doc), ConfigError);

  doc = default_lorentzian_config();
  doc["state"]["modes"] = json::array({{{"k", 1}, {"re", 0.6}, {"im", 0.0}}, {{"k", 2}, {"re", 0.5}, {"im", 0.0}}});
  CHECK_THROWS_AS(parse_config(doc).state(), ConfigError);

  doc = default_lorentzian_config();
  doc.erase("state");
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("weight and decay class mismatch is a warning") {
  auto doc = default_lorentzian_config();
  doc["weight"] = {{"kind", "polynomial"}, {"rate", 2.0}};
  const auto c = parse_config(doc);
  CHECK(c.warnings.size() == 1);
}

TEST_CASE("output directory override") {
  const auto c = parse_config(default_lorentzian_config());
  const char* saved = std::getenv("DEPHASE_OUTPUT_DIR");
  const std::string restore = saved ? saved : "";
  ::unsetenv("DEPHASE_OUTPUT_DIR");
  CHECK(resolve_output_dir(c) == "out/lorentzian");
  ::setenv("DEPHASE_OUTPUT_DIR", "/tmp/elsewhere", 1);
  CHECK(resolve_output_dir(c) == "/tmp/elsewhere");
  if (saved) {
    ::setenv("DEPHASE_OUTPUT_DIR", restore.c_str(), 1);
  } else {
    ::unsetenv("DEPHASE_OUTPUT_DIR");
  }
}

TEST_CASE("CSV round trip is bit exact") {
  const auto dir = temp_dir("csv");
  std::filesystem::create_directories(dir);
  const std::vector<double> t{0.0, 0.05, 0.1};
  const std::vector<double> v{1.0 / 3.0, -2.0e-300, 6.02214076e23};
  write_csv(dir + "/x.csv", {"t", "v"}, {t, v});
  const auto table = read_csv(dir + "/x.csv");
  CHECK(table.header == std::vector<std::string>{"t", "v"});
  CHECK(table.column("t") == t);
  CHECK(table.column("v") == v);
  CHECK_THROWS_AS(table.column("w"), std::invalid_argument);
}

TEST_CASE("solve at zero coupling writes the free flow") {
  const auto dir = temp_dir("free");
  std::ostringstream log;
  ::unsetenv("DEPHASE_OUTPUT_DIR");
  CHECK(run_solve(parse_config(small_config(dir, 0.0)), log) == kExitOk);
  const auto table = read_csv(dir + "/order_parameter.csv");
  CHECK(table.header == std::vector<std::string>{"t", "re_z", "im_z", "R", "distance"});
  const auto& t = table.column("t");
  const auto& r = table.column("R");
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(r[i] - 0.05 * std::exp(-t[i])) < 1e-8);
  const auto deph = read_csv(dir + "/dephasing.csv");
  CHECK(deph.header == std::vector<std::string>{"t", "distance", "R", "R_free"});

  const auto summary = read_json(dir + "/summary.json");
  for (const char* key : {"config_echo", "norms", "cauchy_ratios", "contraction", "estimrn_check", "lemma_ratios",
                          "decay_fit", "envelope", "tail_bounds", "schema_version"}) {
    CHECK_MESSAGE(summary.contains(key), key);
  }
  CHECK(summary["schema_version"] == kSchemaVersion);
  CHECK(summary["decay_fit"]["rate"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(read_json(dir + "/ledger.json")["status"] == "converged");
}

TEST_CASE("solve at small coupling passes every explicit check") {
  const auto dir = temp_dir("small");
  std::ostringstream log;
  CHECK(run_solve(parse_config(small_config(dir, 0.05)), log) == kExitOk);
  const auto summary = read_json(dir + "/summary.json");
  CHECK(summary["passed"] == true);
  const double rate = summary["decay_fit"]["rate"].get<double>();
  CHECK(rate > 0.95);
  CHECK(rate < 1.05);
}

TEST_CASE("strong coupling exits with the not-converging code and keeps the ledger") {
  const auto dir = temp_dir("strong");
  std::ostringstream log;
  CHECK(run_solve(parse_config(small_config(dir, 10.0)), log) == kExitNotConverging);
  const auto ledger = read_json(dir + "/ledger.json");
  CHECK(ledger["status"] == "not_converging");
  CHECK(ledger["entries"].size() >= 1);
}

TEST_CASE("a grid too coarse for the state is a configuration failure") {
  const auto dir = temp_dir("coarse");
  auto doc = small_config(dir, 0.05);
  doc["grid"]["theta_nodes"] = 4;
  std::ostringstream log;
  CHECK(run_solve(parse_config(doc), log) == kExitConfig);

  std::filesystem::create_directories(dir);
  const std::string path = dir + "/coarse.json";
  std::ofstream(path) << doc.dump();
  VerifyOptions v;
  v.configs = {path};
  CHECK(run_verify(v, log) != kExitOk);
  CHECK(log.str().find("FAILED") != std::string::npos);
}

TEST_CASE("fit subcommand on a solve output") {
  const auto dir = temp_dir("fit");
  std::ostringstream log;
  REQUIRE(run_solve(parse_config(small_config(dir, 0.0)), log) == kExitOk);
  FitOptions f;
  f.csv = dir + "/order_parameter.csv";
  f.window = {2.0, 8.0};
  CHECK(run_fit(f, log) == kExitOk);
  const auto text = log.str();
  const auto at = text.find("rate ");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(text.substr(at + 5)) == doctest::Approx(1.0).epsilon(1e-6));
  f.column = "missing";
  CHECK(run_fit(f, log) == kExitConfig);
}

TEST_CASE("simulate writes particles and the comparison table") {
  const auto dir = temp_dir("sim");
  auto doc = small_config(dir, 0.05);
  doc["particles"] = {{"n", 2000}, {"dt", 0.01}, {"seed", 3}, {"t_end", 2.0}};
  std::ostringstream log;
  const auto cfg = parse_config(doc);
  REQUIRE(run_solve(cfg, log) == kExitOk);
  SimulateOptions s;
  s.kinetic_csv = dir + "/order_parameter.csv";
  s.record_every = 5;
  CHECK(run_simulate(cfg, s, log) == kExitOk);
  const auto particles = read_csv(dir + "/particles.csv");
  CHECK(particles.header == std::vector<std::string>{"t", "R_N", "phi_N"});
  CHECK(particles.column("t").size() == 41);
  const auto cmp = read_csv(dir + "/comparison.csv");
  for (double d : cmp.column("difference")) CHECK(std::abs(d) < 0.1);
}
