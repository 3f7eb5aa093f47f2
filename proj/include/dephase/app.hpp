#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dephase/config.hpp"
#include "dephase/decay.hpp"
#include "dephase/particles.hpp"
#include "dephase/scheme.hpp"

namespace dephase {

inline constexpr int kSchemaVersion = 1;

/// Process exit codes shared by all subcommands.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitNotConverging = 3,
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Everything produced by one kinetic solve.
struct KineticRun {
  RunConfig config;
  std::optional<Grid> grid;
  std::optional<AsymptoticState> state;
  OuterResult outer;
  std::vector<double> r_free;             // |z_free(t_i)|
  std::optional<ReconstructedDensity> density;
  LemmaReport lemmas;
  std::optional<DecayModel> fit;
  std::string fit_note;
  EnvelopeCertificate envelope;           // R against the fitted envelope
  EnvelopeCertificate distance_envelope;  // dephasing distance at the fitted rate
  std::optional<double> oracle_difference;
  double oracle_budget = 0.0;             // 1e-6 + final tail bound
  std::vector<Check> checks;
  double solve_seconds = 0.0;            // outer_solve only
  double seconds = 0.0;

  bool passed() const;
};

/// Runs outer_solve, reconstruction, lemma checks, decay fit and envelope
/// certification. Throws ConfigError / QuadratureError before any solve work.
KineticRun solve_kinetic(const RunConfig& config, bool with_oracle = false);

nlohmann::json ledger_json(const DiagnosticsLedger& ledger);
nlohmann::json summary_json(const KineticRun& run);

/// order_parameter.csv, dephasing.csv, ledger.json, summary.json.
void write_solve_artifacts(const KineticRun& run, const std::string& dir);

/// "{:.16e}" rows with a header; `t` is the first column.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

int run_solve(const RunConfig& config, std::ostream& log);

struct SimulateOptions {
  std::optional<std::string> kinetic_csv;  // order_parameter.csv of a previous solve
  int record_every = 1;
};
int run_simulate(const RunConfig& config, const SimulateOptions& options, std::ostream& log);

struct FitOptions {
  std::string csv;
  std::string column = "R";
  DecayModelKind kind = DecayModelKind::Exponential;
  FitWindow window;
  double floor = kDefaultFitFloor;
};
int run_fit(const FitOptions& options, std::ostream& log);

struct VerifyOptions {
  std::vector<std::string> configs;  // preflighted before the suite
  std::vector<int> criteria;         // empty: all
};
int run_verify(const VerifyOptions& options, std::ostream& log);

}  // namespace dephase
