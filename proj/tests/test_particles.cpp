#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <string>

#include "doctest.h"

#include "dephase/particles.hpp"
#include "dephase/scheme.hpp"

using namespace dephase;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrapped_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

ParticleEnsemble random_ensemble(std::size_t n, double mu, double omega_spread, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> th(0.0, kTwoPi);
  std::normal_distribution<double> om(0.0, omega_spread);
  ParticleEnsemble e;
  e.mu = mu;
  for (std::size_t k = 0; k < n; ++k) {
    e.theta.push_back(th(gen));
    e.omega.push_back(omega_spread > 0.0 ? om(gen) : 0.0);
  }
  return e;
}

}  // namespace

TEST_CASE("a single oscillator rotates freely") {
  for (double mu : {0.0, 1.0, 25.0}) {
    ParticleEnsemble e;
    e.mu = mu;
    e.theta = {0.3};
    e.omega = {1.7};
    const auto trace = simulate(e, 0.01, 5.0, 100);
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
      const auto expected = std::polar(1.0, 0.3 + 1.7 * trace.t[i]);
      CHECK(std::abs(trace.z[i] - expected) < 1e-11);
    }
  }
}

TEST_CASE("zero coupling is exact free transport") {
  const auto e = random_ensemble(2000, 0.0, 1.0, 3);
  ParticleEnsemble moved = e;
  for (int s = 0; s < 100; ++s) step_in_place(moved, 0.02);
  CHECK(moved.t == doctest::Approx(2.0));
  for (std::size_t k = 0; k < e.size(); ++k) {
    REQUIRE(moved.omega[k] == e.omega[k]);
    REQUIRE(wrapped_distance(moved.theta[k], e.theta[k] + 2.0 * e.omega[k]) < 1e-11);
    REQUIRE(moved.theta[k] >= 0.0);
    REQUIRE(moved.theta[k] < kTwoPi);
  }
}

TEST_CASE("frequencies are constants of motion") {
  const auto e = random_ensemble(500, 2.0, 0.5, 9);
  const auto after = step(step(e, 0.05), 0.05);
  for (std::size_t k = 0; k < e.size(); ++k) REQUIRE(after.omega[k] == e.omega[k]);
}

TEST_CASE("identical oscillators synchronize") {
  auto e = random_ensemble(200, 1.0, 0.0, 21);
  const double r0 = std::abs(empirical_order_parameter(e));
  REQUIRE(r0 < 0.3);
  const auto trace = simulate(e, 0.01, 40.0, 100);
  CHECK(std::abs(trace.z.back()) > 0.999);
  // Monotone growth after the transient.
  const std::size_t start = trace.z.size() / 4;
  for (std::size_t i = start + 1; i < trace.z.size(); ++i) {
    CHECK(std::abs(trace.z[i]) >= std::abs(trace.z[i - 1]) - 1e-12);
  }
}

TEST_CASE("the mean field does not depend on the worker count") {
  const auto e = random_ensemble(20000, 0.5, 1.0, 4);
  const char* saved = std::getenv("DEPHASE_THREADS");
  const std::string restore = saved ? saved : "";
  ::setenv("DEPHASE_THREADS", "1", 1);
  const auto a = simulate(e, 0.01, 0.2, 5);
  ::setenv("DEPHASE_THREADS", "4", 1);
  const auto b = simulate(e, 0.01, 0.2, 5);
  if (saved) {
    ::setenv("DEPHASE_THREADS", restore.c_str(), 1);
  } else {
    ::unsetenv("DEPHASE_THREADS");
  }
  REQUIRE(a.z.size() == b.z.size());
  for (std::size_t i = 0; i < a.z.size(); ++i) REQUIRE(a.z[i] == b.z[i]);
}

TEST_CASE("RK4 converges at fourth order") {
  const auto e = random_ensemble(64, 1.5, 1.0, 12);
  auto end = [&](double dt) { return simulate(e, dt, 2.0, static_cast<int>(std::lround(2.0 / dt))).z.back(); };
  const auto ref = end(0.00125);
  const double e1 = std::abs(end(0.04) - ref);
  const double e2 = std::abs(end(0.02) - ref);
  CHECK(e1 / e2 > 12.0);
}

TEST_CASE("initial ensemble reproduces the kinetic order parameter") {
  const auto p = FrequencyProfile::lorentzian(1.0);
  const Grid g = Grid::build(GridSpec{0.05, 8.0, 16, 33}, p);
  const AsymptoticState st(p, {{1, {0.05, 0.0}}}, {DecayKind::Analytic, 1.0});
  OuterOptions o;
  o.tail_budget = 1e-4;
  const auto r = outer_solve(st, g, 0.05, WeightSpec::exponential(0.9), o);
  REQUIRE(r.converged());
  for (std::size_t n : {10000u, 100000u}) {
    const auto init = init_from_solution(r.field, g, st, 0.05, n, 1);
    CHECK(init.ensemble.size() == n);
    CHECK(std::abs(empirical_order_parameter(init.ensemble) - r.z.z[0]) <= 3.0 / std::sqrt(static_cast<double>(n)));
  }
  const auto a = init_from_solution(r.field, g, st, 0.05, 1000, 5);
  const auto b = init_from_solution(r.field, g, st, 0.05, 1000, 5);
  CHECK(a.ensemble.theta == b.ensemble.theta);
  CHECK(a.resampled == b.resampled);
}

TEST_CASE("zero coupling initialization is an exact sample") {
  const auto p = FrequencyProfile::gaussian(1.0);
  const Grid g = Grid::build(GridSpec{0.05, 4.0, 16, 33}, p);
  const AsymptoticState st(p, {{1, {0.05, 0.0}}}, {DecayKind::Analytic, 1.0});
  const auto r = outer_solve(st, g, 0.0, WeightSpec::exponential(0.9));
  const auto init = init_from_solution(r.field, g, st, 0.0, 5000, 8);
  const auto labels = sample_labels(st, 5000, 8);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k].omega < g.omega_nodes().front().omega || labels[k].omega > g.omega_nodes().back().omega) continue;
    REQUIRE(wrapped_distance(init.ensemble.theta[k], labels[k].theta) < 1e-14);
    REQUIRE(init.ensemble.omega[k] == labels[k].omega);
  }
}

TEST_CASE("invalid particle arguments") {
  ParticleEnsemble empty;
  CHECK_THROWS_AS(empirical_order_parameter(empty), std::invalid_argument);
  const auto e = random_ensemble(10, 0.1, 1.0, 1);
  CHECK_THROWS_AS(step(e, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(simulate(e, 0.01, 1.0, 0), std::invalid_argument);
}
