#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace dephase {

using complex = std::complex<double>;

enum class ProfileKind { Gaussian, Lorentzian, Laplace };

std::string to_string(ProfileKind kind);
ProfileKind profile_kind_from_string(const std::string& name);

/// Distribution g(omega) of the natural frequencies.
///
/// All three kinds are symmetric about zero, so the transform
/// ghat(eta) = int exp(-i eta omega) g(omega) domega is real.
class FrequencyProfile {
 public:
  static FrequencyProfile gaussian(double sigma);
  static FrequencyProfile lorentzian(double scale);
  static FrequencyProfile laplace(double scale);
  static FrequencyProfile make(ProfileKind kind, double parameter);

  ProfileKind kind() const { return kind_; }
  double parameter() const { return parameter_; }

  double density(double omega) const;
  double cdf(double omega) const;
  double quantile(double u) const;  // u in (0, 1)
  double transform(double eta) const;

 private:
  FrequencyProfile(ProfileKind kind, double parameter);

  ProfileKind kind_;
  double parameter_;
};

struct Mode {
  int k = 1;  // strictly positive after normalization
  complex amplitude{0.0, 0.0};
};

enum class DecayKind { Analytic, Sobolev };

struct DecayClass {
  DecayKind kind = DecayKind::Analytic;
  double rate = 1.0;  // lambda for Analytic, gamma for Sobolev
};

struct Label {
  double theta = 0.0;
  double omega = 0.0;
};

/// Asymptotic state f_inf(theta, omega) = g(omega) (1 + sum_k a_k e^{ik theta}) / (2 pi)
/// with a_{-k} = conj(a_k). Only k > 0 is stored.
class AsymptoticState {
 public:
  /// Modes with negative k are folded onto k > 0 by conjugation. Throws
  /// std::invalid_argument on k = 0, duplicate k, or sum |a_k| > 1.
  AsymptoticState(FrequencyProfile profile, std::vector<Mode> modes, DecayClass decay);

  const FrequencyProfile& profile() const { return profile_; }
  const std::vector<Mode>& modes() const { return modes_; }
  const DecayClass& decay() const { return decay_; }

  /// theta-Fourier coefficient c_k with c_0 = 1, c_k = a_k, c_{-k} = conj(a_k).
  complex coefficient(int k) const;
  int max_mode() const;
  /// sum over all nonzero k (both signs) of |a_k|.
  double envelope() const;

  /// (1 + sum_k a_k e^{ik theta}), real and in [0, 2].
  double theta_factor(double theta) const;
  double density(double theta, double omega) const;
  /// d/dtheta of density.
  double density_theta_derivative(double theta, double omega) const;

 private:
  FrequencyProfile profile_;
  std::vector<Mode> modes_;
  DecayClass decay_;
};

/// fhat(k, eta) = int int exp(-i(k theta + eta omega)) f_inf dtheta domega.
/// With this convention the free-flow order parameter is fhat(-1, -t).
complex spectral_transform(const AsymptoticState& state, int k, double eta);

/// Free-flow order parameter z_free(t) = int int e^{i(theta + omega t)} f_inf.
inline complex free_order_parameter(const AsymptoticState& state, double t) {
  return spectral_transform(state, -1, -t);
}

struct SpectralSupremum {
  double analytic = 0.0;      // sup |fhat| e^{lambda(|k|+|eta|)}
  double sobolev_keta = 0.0;  // sup |fhat| <k,eta>^gamma
  double sobolev_eta = 0.0;   // sup |fhat| <eta>^gamma
  double eta_at_max = 0.0;    // location of the reported sup for the declared class
  bool finite = true;
};

/// Grid supremum of the spectral decay functionals over |k| <= k_max,
/// |eta| <= eta_max. The analytic field uses `lambda`, the Sobolev ones `gamma`.
SpectralSupremum spectral_supremum(const AsymptoticState& state, double lambda, double gamma,
                                   int k_max = 4, double eta_max = 200.0, int eta_points = 20001);

/// i.i.d. draws from f_inf: inverse CDF in omega, rejection in theta
/// against the envelope 1 + sum |a_k|. Deterministic per (state, n, seed).
std::vector<Label> sample_labels(const AsymptoticState& state, std::size_t n, std::uint64_t seed);

}  // namespace dephase
