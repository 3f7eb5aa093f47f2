#include "dephase/decay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

namespace dephase {

std::string to_string(DecayModelKind kind) {
  return kind == DecayModelKind::Exponential ? "exponential" : "polynomial";
}

DecayModelKind decay_model_kind_from_string(const std::string& name) {
  if (name == "exponential") return DecayModelKind::Exponential;
  if (name == "polynomial") return DecayModelKind::Polynomial;
  throw std::invalid_argument("unknown decay model '" + name + "'");
}

double DecayModel::weight(double t) const {
  if (kind == DecayModelKind::Exponential) return std::exp(rate * t);
  return std::pow(1.0 + t * t, 0.5 * rate);
}

DecayModel fit_decay(const std::vector<double>& t, const std::vector<double>& value,
                     DecayModelKind kind, FitWindow window, double floor) {
  if (t.size() != value.size()) throw std::invalid_argument("fit_decay: size mismatch");
  if (!(window.t_b > window.t_a)) throw std::invalid_argument("fit_decay: empty window");

  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < window.t_a || t[i] > window.t_b) continue;
    if (value[i] < 0.0) {
      throw NonPositiveValues(fmt::format("negative value {} at t = {}", value[i], t[i]));
    }
    if (!(value[i] > floor)) continue;
    x.push_back(kind == DecayModelKind::Exponential ? t[i] : 0.5 * std::log1p(t[i] * t[i]));
    y.push_back(std::log(value[i]));
  }
  if (x.size() < 10) {
    throw InsufficientData(fmt::format("{} usable points in [{}, {}], need >= 10", x.size(),
                                       window.t_a, window.t_b));
  }

  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;

  DecayModel m;
  m.kind = kind;
  m.rate = -slope;
  m.amplitude = std::exp(intercept);
  m.window = window;
  m.points = x.size();
  for (std::size_t k = 0; k < x.size(); ++k) {
    m.residual = std::max(m.residual, std::abs(intercept + slope * x[k] - y[k]));
  }
  return m;
}

EnvelopeCertificate certify_envelope(const std::vector<double>& t, const std::vector<double>& value,
                                     const DecayModel& model, double growth_slack, double floor) {
  if (t.size() != value.size()) throw std::invalid_argument("certify_envelope: size mismatch");
  EnvelopeCertificate c;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (value[i] > floor) usable.push_back(i);
  }
  if (usable.size() < 2) return c;

  const double t_mid = 0.5 * (t[usable.front()] + t[usable.back()]);
  for (std::size_t i : usable) {
    const double p = value[i] * model.weight(t[i]);
    if (p > c.c_min) {
      c.c_min = p;
      c.t_at_max = t[i];
    }
    if (t[i] <= t_mid) {
      c.head_max = std::max(c.head_max, p);
    } else {
      c.tail_max = std::max(c.tail_max, p);
    }
  }
  c.passed = std::isfinite(c.c_min) && c.tail_max <= (1.0 + growth_slack) * c.head_max;
  return c;
}

}  // namespace dephase
