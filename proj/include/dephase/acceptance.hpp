#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dephase/app.hpp"

namespace dephase {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::vector<int> only;            // empty: all ten
  std::ostream* progress = nullptr; // one line per criterion as it finishes
};

/// The ten acceptance criteria on the built-in configurations, with their
/// tolerances fixed here. Each result carries the measured numbers.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

/// "[PASS] 3 name (1.2 s): detail"
std::string format_line(const CriterionResult& r);

/// Criteria that fail for statistical reasons documented in the README; the
/// acceptance binary reports them as FAIL but does not treat them as regressions.
bool known_red(int id);

/// Kinetic outputs of a small run are bit-identical across particle seeds and
/// worker-thread counts.
Check determinism_check();

}  // namespace dephase
