#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "dephase/decay.hpp"

using namespace dephase;

namespace {

std::vector<double> grid(double dt, double t_max) {
  std::vector<double> t;
  for (int i = 0; i * dt <= t_max + 1e-12; ++i) t.push_back(i * dt);
  return t;
}

std::vector<double> model_values(const std::vector<double>& t, DecayModelKind kind, double amp, double rate) {
  std::vector<double> v;
  for (double s : t) v.push_back(kind == DecayModelKind::Exponential ? amp * std::exp(-rate * s)
                                                                      : amp * std::pow(1.0 + s * s, -0.5 * rate));
  return v;
}

}  // namespace

TEST_CASE("fit recovers synthetic rates exactly") {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> rate(0.2, 3.0), amp(1e-3, 10.0);
  const auto t = grid(0.05, 40.0);
  for (auto kind : {DecayModelKind::Exponential, DecayModelKind::Polynomial}) {
    for (int trial = 0; trial < 40; ++trial) {
      const double r = rate(gen), a = amp(gen);
      const auto v = model_values(t, kind, a, r);
      const auto m = fit_decay(t, v, kind, {2.0, 15.0});
      CHECK(m.rate == doctest::Approx(r).epsilon(1e-10));
      CHECK(m.amplitude == doctest::Approx(a).epsilon(1e-9));
      CHECK(m.residual < 1e-9);
      std::size_t above = 0;
      for (std::size_t i = 0; i < t.size(); ++i) above += (t[i] >= 2.0 && t[i] <= 15.0 && v[i] > kDefaultFitFloor);
      CHECK(m.points == above);
      CHECK(m(7.0) == doctest::Approx(v[140]).epsilon(1e-9));
    }
  }
}

TEST_CASE("each model fits its own class better") {
  const auto t = grid(0.05, 40.0);
  const auto e = model_values(t, DecayModelKind::Exponential, 0.05, 1.0);
  const auto p = model_values(t, DecayModelKind::Polynomial, 0.05, 2.0);
  const FitWindow w{5.0, 15.0};
  CHECK(fit_decay(t, e, DecayModelKind::Exponential, w).residual <
        fit_decay(t, e, DecayModelKind::Polynomial, w).residual);
  CHECK(fit_decay(t, p, DecayModelKind::Polynomial, w).residual <
        fit_decay(t, p, DecayModelKind::Exponential, w).residual);
}

TEST_CASE("fit input errors") {
  const auto t = grid(0.5, 20.0);
  auto v = model_values(t, DecayModelKind::Exponential, 1.0, 1.0);
  v[10] = -1e-3;
  CHECK_THROWS_AS(fit_decay(t, v, DecayModelKind::Exponential, {2.0, 15.0}), NonPositiveValues);
  // Outside the window a negative value is ignored.
  CHECK_NOTHROW(fit_decay(t, v, DecayModelKind::Exponential, {6.0, 15.0}));
  // Values under the floor are dropped, leaving too few points.
  const auto tiny = model_values(t, DecayModelKind::Exponential, 1e-13, 1.0);
  CHECK_THROWS_AS(fit_decay(t, tiny, DecayModelKind::Exponential, {2.0, 15.0}), InsufficientData);
  const auto coarse = grid(2.0, 20.0);
  CHECK_THROWS_AS(fit_decay(coarse, model_values(coarse, DecayModelKind::Exponential, 1.0, 1.0),
                            DecayModelKind::Exponential, {2.0, 15.0}),
                  InsufficientData);
  CHECK(decay_model_kind_from_string(to_string(DecayModelKind::Polynomial)) == DecayModelKind::Polynomial);
  CHECK_THROWS_AS(decay_model_kind_from_string("gaussian"), std::invalid_argument);
}

TEST_CASE("envelope certificate of a pure decay") {
  const auto t = grid(0.05, 20.0);
  const auto v = model_values(t, DecayModelKind::Exponential, 0.05, 1.0);
  const auto m = fit_decay(t, v, DecayModelKind::Exponential, {2.0, 15.0});
  const auto c = certify_envelope(t, v, m);
  CHECK(c.passed);
  CHECK(c.c_min == doctest::Approx(0.05).epsilon(1e-9));
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(v[i] <= c.c_min / m.weight(t[i]) * (1.0 + 1e-12));
}

TEST_CASE("envelope certificate is monotone in the rate") {
  // Passing at rate r implies passing at every slower rate, and C_min shrinks with the rate.
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 2.0), noise(-0.2, 0.2);
  const auto t = grid(0.05, 20.0);
  for (int trial = 0; trial < 30; ++trial) {
    const double true_rate = 0.5 + u(gen);
    std::vector<double> v;
    for (double s : t) v.push_back(std::exp(-true_rate * s) * (1.0 + noise(gen)));
    DecayModel m;
    double prev_c = std::numeric_limits<double>::infinity();
    bool seen_pass = false;
    for (double r = 3.0; r >= 0.0; r -= 0.1) {
      m.rate = r;
      const auto c = certify_envelope(t, v, m);
      if (seen_pass) {
        CHECK(c.passed);
      }
      seen_pass = seen_pass || c.passed;
      CHECK(c.c_min <= prev_c * (1.0 + 1e-12));
      prev_c = c.c_min;
    }
    m.rate = true_rate * 0.8;
    CHECK(certify_envelope(t, v, m).passed);
  }
}

TEST_CASE("envelope certificate rejects a rate the data does not support") {
  const auto t = grid(0.05, 20.0);
  const auto v = model_values(t, DecayModelKind::Exponential, 1.0, 0.5);
  DecayModel m;
  m.rate = 1.0;
  CHECK_FALSE(certify_envelope(t, v, m).passed);
  m.kind = DecayModelKind::Polynomial;
  m.rate = 2.0;
  const auto p = model_values(t, DecayModelKind::Polynomial, 1.0, 1.0);
  CHECK_FALSE(certify_envelope(t, p, m).passed);
}
