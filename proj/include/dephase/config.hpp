#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dephase/decay.hpp"
#include "dephase/norms_grids.hpp"
#include "dephase/scheme.hpp"
#include "dephase/spectral_state.hpp"

namespace dephase {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParticleConfig {
  std::size_t n = 10000;
  double dt = 0.01;
  std::uint64_t seed = 1;
  double t_end = 20.0;  // clipped to the kinetic grid's t_max
};

struct FitConfig {
  FitWindow window{2.0, 15.0};
  double floor = kDefaultFitFloor;
};

/// Everything a run needs; parsed from a single JSON document.
struct RunConfig {
  ProfileKind profile = ProfileKind::Lorentzian;
  double profile_parameter = 1.0;
  std::vector<Mode> modes;
  DecayClass decay;
  GridSpec grid;
  double mu = 0.05;
  WeightKind weight_kind = WeightKind::Exponential;
  double weight_rate = 0.9;
  OuterOptions outer;
  FitConfig fit;
  ParticleConfig particles;
  std::string output_dir = "out";

  nlohmann::json echo;                // normalized config as parsed
  std::vector<std::string> warnings;  // non-fatal inconsistencies

  AsymptoticState state() const;
  FrequencyProfile frequency_profile() const;
  WeightSpec weight() const;
  Grid build_grid() const;
  DecayModelKind fit_kind() const;
};

/// Parses and validates a config document. Unknown keys are rejected so typos
/// cannot silently fall back to defaults. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

/// Serializes a config back to the document format accepted by parse_config.
nlohmann::json to_json(const RunConfig& config);

/// Built-in default runs: Lorentzian (analytic class, exponential weight) and
/// Laplace (Sobolev class, polynomial weight), both with a 0.1 cosine mode.
nlohmann::json default_lorentzian_config();
nlohmann::json default_laplace_config();

/// Output directory after the DEPHASE_OUTPUT_DIR override.
std::string resolve_output_dir(const RunConfig& config);

}  // namespace dephase
