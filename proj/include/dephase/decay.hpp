#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dephase {

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonPositiveValues : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DecayModelKind { Exponential, Polynomial };

std::string to_string(DecayModelKind kind);
DecayModelKind decay_model_kind_from_string(const std::string& name);

struct FitWindow {
  double t_a = 2.0;
  double t_b = 15.0;
};

/// value(t) ~ amplitude * e^{-rate t}  or  amplitude * <t>^{-rate}.
struct DecayModel {
  DecayModelKind kind = DecayModelKind::Exponential;
  double rate = 0.0;
  double amplitude = 0.0;
  FitWindow window;
  double residual = 0.0;  // max |log model - log data| over the points used
  std::size_t points = 0;

  /// Inverse envelope e^{rate t} or <t>^{rate}.
  double weight(double t) const;
  double operator()(double t) const { return amplitude / weight(t); }
};

inline constexpr double kDefaultFitFloor = 1e-12;

/// Least squares of log value against t (Exponential) or log <t> (Polynomial)
/// over the window, using only points with value > floor.
/// Throws NonPositiveValues for negative samples in the window and
/// InsufficientData for fewer than 10 usable points.
DecayModel fit_decay(const std::vector<double>& t, const std::vector<double>& value,
                     DecayModelKind kind, FitWindow window, double floor = kDefaultFitFloor);

struct EnvelopeCertificate {
  double c_min = 0.0;          // max over the grid of value * weight
  double t_at_max = 0.0;
  double head_max = 0.0;       // max of value * weight on the first half of the range
  double tail_max = 0.0;       // same on the second half
  bool passed = false;
};

/// value(t) <= C_min w_model(t)^{-1} on the grid. Passes iff C_min is finite and
/// the weighted path does not grow towards the end of the range: the maximum over
/// the second half of the usable times is at most (1 + growth_slack) times the
/// maximum over the first half. Points at or below `floor` are ignored.
EnvelopeCertificate certify_envelope(const std::vector<double>& t, const std::vector<double>& value,
                                     const DecayModel& model, double growth_slack = 0.5,
                                     double floor = kDefaultFitFloor);

}  // namespace dephase
