#include "dephase/spectral_state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace dephase {

namespace {

constexpr double kPi = std::numbers::pi;

// Uniform double in the open interval (0, 1) from 53 random bits.
double open_unit(std::mt19937_64& gen) {
  return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Gaussian:
      return "gaussian";
    case ProfileKind::Lorentzian:
      return "lorentzian";
    case ProfileKind::Laplace:
      return "laplace";
  }
  return "unknown";
}

ProfileKind profile_kind_from_string(const std::string& name) {
  if (name == "gaussian") return ProfileKind::Gaussian;
  if (name == "lorentzian") return ProfileKind::Lorentzian;
  if (name == "laplace") return ProfileKind::Laplace;
  throw std::invalid_argument("unknown frequency profile '" + name + "'");
}

FrequencyProfile::FrequencyProfile(ProfileKind kind, double parameter)
    : kind_(kind), parameter_(parameter) {
  if (!(parameter > 0.0) || !std::isfinite(parameter)) {
    throw std::invalid_argument("frequency profile parameter must be finite and > 0");
  }
}

FrequencyProfile FrequencyProfile::gaussian(double sigma) {
  return {ProfileKind::Gaussian, sigma};
}
FrequencyProfile FrequencyProfile::lorentzian(double scale) {
  return {ProfileKind::Lorentzian, scale};
}
FrequencyProfile FrequencyProfile::laplace(double scale) { return {ProfileKind::Laplace, scale}; }
FrequencyProfile FrequencyProfile::make(ProfileKind kind, double parameter) {
  return {kind, parameter};
}

double FrequencyProfile::density(double omega) const {
  const double p = parameter_;
  switch (kind_) {
    case ProfileKind::Gaussian:
      return std::exp(-0.5 * omega * omega / (p * p)) / (p * std::sqrt(2.0 * kPi));
    case ProfileKind::Lorentzian:
      return p / (kPi * (p * p + omega * omega));
    case ProfileKind::Laplace:
      return std::exp(-std::abs(omega) / p) / (2.0 * p);
  }
  return 0.0;
}

double FrequencyProfile::cdf(double omega) const {
  const double p = parameter_;
  switch (kind_) {
    case ProfileKind::Gaussian:
      return 0.5 * std::erfc(-omega / (p * std::numbers::sqrt2));
    case ProfileKind::Lorentzian:
      return 0.5 + std::atan(omega / p) / kPi;
    case ProfileKind::Laplace:
      return omega < 0.0 ? 0.5 * std::exp(omega / p) : 1.0 - 0.5 * std::exp(-omega / p);
  }
  return 0.0;
}

double FrequencyProfile::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile argument outside (0, 1)");
  const double p = parameter_;
  switch (kind_) {
    case ProfileKind::Gaussian:
      return p * std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
    case ProfileKind::Lorentzian:
      return p * std::tan(kPi * (u - 0.5));
    case ProfileKind::Laplace:
      return u < 0.5 ? p * std::log(2.0 * u) : -p * std::log(2.0 * (1.0 - u));
  }
  return 0.0;
}

double FrequencyProfile::transform(double eta) const {
  const double p = parameter_;
  switch (kind_) {
    case ProfileKind::Gaussian:
      return std::exp(-0.5 * p * p * eta * eta);
    case ProfileKind::Lorentzian:
      return std::exp(-p * std::abs(eta));
    case ProfileKind::Laplace:
      return 1.0 / (1.0 + p * p * eta * eta);
  }
  return 0.0;
}

AsymptoticState::AsymptoticState(FrequencyProfile profile, std::vector<Mode> modes,
                                 DecayClass decay)
    : profile_(profile), decay_(decay) {
  if (!(decay.rate > 0.0)) throw std::invalid_argument("decay class rate must be > 0");
  if (decay.kind == DecayKind::Sobolev && decay.rate < 2.0) {
    throw std::invalid_argument("Sobolev decay class requires gamma >= 2");
  }
  for (auto m : modes) {
    if (m.k == 0) throw std::invalid_argument("mode index k = 0 is fixed by normalization");
    if (m.k < 0) {
      m.k = -m.k;
      m.amplitude = std::conj(m.amplitude);
    }
    auto same = [&](const Mode& o) { return o.k == m.k; };
    if (std::any_of(modes_.begin(), modes_.end(), same)) {
      throw std::invalid_argument("duplicate mode index k = " + std::to_string(m.k));
    }
    modes_.push_back(m);
  }
  std::sort(modes_.begin(), modes_.end(), [](const Mode& a, const Mode& b) { return a.k < b.k; });
  // 1 + sum_k a_k e^{ik theta} >= 1 - sum |a_k| over both signs of k.
  if (envelope() > 1.0 + 1e-15) {
    throw std::invalid_argument("mode amplitudes violate sum |a_k| <= 1; f_inf may be negative");
  }
}

complex AsymptoticState::coefficient(int k) const {
  if (k == 0) return {1.0, 0.0};
  const int ak = std::abs(k);
  for (const auto& m : modes_) {
    if (m.k == ak) return k > 0 ? m.amplitude : std::conj(m.amplitude);
  }
  return {0.0, 0.0};
}

int AsymptoticState::max_mode() const { return modes_.empty() ? 0 : modes_.back().k; }

double AsymptoticState::envelope() const {
  double s = 0.0;
  for (const auto& m : modes_) s += 2.0 * std::abs(m.amplitude);
  return s;
}

double AsymptoticState::theta_factor(double theta) const {
  double s = 1.0;
  for (const auto& m : modes_) {
    s += 2.0 * std::real(m.amplitude * std::polar(1.0, m.k * theta));
  }
  return s;
}

double AsymptoticState::density(double theta, double omega) const {
  return profile_.density(omega) * theta_factor(theta) / (2.0 * kPi);
}

double AsymptoticState::density_theta_derivative(double theta, double omega) const {
  double s = 0.0;
  for (const auto& m : modes_) {
    s += 2.0 * std::real(complex(0.0, m.k) * m.amplitude * std::polar(1.0, m.k * theta));
  }
  return profile_.density(omega) * s / (2.0 * kPi);
}

complex spectral_transform(const AsymptoticState& state, int k, double eta) {
  const complex c = state.coefficient(k);
  if (c == complex(0.0, 0.0)) return c;
  return c * state.profile().transform(eta);
}

SpectralSupremum spectral_supremum(const AsymptoticState& state, double lambda, double gamma,
                                   int k_max, double eta_max, int eta_points) {
  SpectralSupremum out;
  double tail_value = 0.0;
  double half_value = 0.0;
  const double deta = eta_max / (eta_points - 1);
  const bool analytic = state.decay().kind == DecayKind::Analytic;
  for (int k = -k_max; k <= k_max; ++k) {
    if (state.coefficient(k) == complex(0.0, 0.0)) continue;
    for (int i = 0; i < eta_points; ++i) {
      const double eta = i * deta;  // all built-in profiles are even in eta
      const double mag = std::abs(spectral_transform(state, k, eta));
      const double a = mag * std::exp(lambda * (std::abs(k) + eta));
      const double sk = mag * std::pow(1.0 + k * k + eta * eta, 0.5 * gamma);
      const double se = mag * std::pow(1.0 + eta * eta, 0.5 * gamma);
      const double declared = analytic ? a : sk;
      if (declared > (analytic ? out.analytic : out.sobolev_keta)) out.eta_at_max = eta;
      out.analytic = std::max(out.analytic, a);
      out.sobolev_keta = std::max(out.sobolev_keta, sk);
      out.sobolev_eta = std::max(out.sobolev_eta, se);
      if (i == eta_points - 1) tail_value = std::max(tail_value, declared);
      if (i == (eta_points - 1) / 2) half_value = std::max(half_value, declared);
    }
  }
  // A functional still growing at the end of the window is reported as unbounded.
  out.finite = std::isfinite(analytic ? out.analytic : out.sobolev_keta) &&
               tail_value <= half_value * (1.0 + 1e-9) + 1e-300;
  return out;
}

std::vector<Label> sample_labels(const AsymptoticState& state, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_labels needs n >= 1");
  const double env = 1.0 + state.envelope();
  if (env > 2.0 + 1e-15) throw std::invalid_argument("invalid state: sum |a_k| > 1");
  std::mt19937_64 gen(seed);
  std::vector<Label> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Label label;
    label.omega = state.profile().quantile(open_unit(gen));
    // The envelope bounds theta_factor, so acceptance is at least 1/2.
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("theta rejection sampling failed");
      const double theta = 2.0 * kPi * open_unit(gen);
      if (open_unit(gen) * env <= state.theta_factor(theta)) {
        label.theta = theta;
        break;
      }
    }
    out.push_back(label);
  }
  return out;
}

}  // namespace dephase
