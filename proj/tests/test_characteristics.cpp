#include <cmath>
#include <complex>
#include <cstdlib>
#include <numbers>
#include <random>
#include <string>

#include "doctest.h"

#include "dephase/characteristics.hpp"

using namespace dephase;

namespace {

constexpr double kPi = std::numbers::pi;

Grid small_grid(double t_max = 10.0, int omega_nodes = 33) {
  return Grid::build(GridSpec{0.05, t_max, 16, omega_nodes}, FrequencyProfile::lorentzian(1.0));
}

OrderParameterPath decaying_path(const Grid& g, double amp, double rate, double spin = 0.0) {
  OrderParameterPath z = OrderParameterPath::zeros(g);
  for (std::size_t i = 0; i < z.size(); ++i) z.z[i] = std::polar(amp * std::exp(-rate * z.times[i]), spin * z.times[i]);
  return z;
}

// mu int_t^T a e^{-r s} sin(theta + omega s - spin s) ds in closed form.
double forced_deviation(double theta, double omega, double t, double T, double mu, double a, double r, double spin) {
  const std::complex<double> k(-r, omega - spin);
  const auto prim = [&](double s) { return std::exp(std::complex<double>(0.0, theta)) * std::exp(k * s) / k; };
  return mu * a * std::imag(prim(T) - prim(t));
}

}  // namespace

TEST_CASE("one Picard step from the free flow matches the closed-form forcing") {
  const double mu = 0.05;
  // theta = pi/2 on the middle omega node (omega = 0): D(t) = mu int_t^T R(s) cos(spin s) ds.
  auto mid_error = [&](double dt) {
    const Grid g = Grid::build(GridSpec{dt, 10.0, 16, 33}, FrequencyProfile::lorentzian(1.0));
    const CharacteristicSolver solver(g, WeightSpec::exponential(0.9));
    const auto field = solver.apply_F(CharacteristicField(g), decaying_path(g, 0.05, 1.0, 0.3), mu);
    const std::size_t mid = g.omega_count() / 2;
    REQUIRE(std::abs(g.omega_nodes()[mid].omega) < 1e-14);
    REQUIRE(g.theta(4) == doctest::Approx(kPi / 2.0));
    double err = 0.0;
    for (std::size_t i = 0; i < g.time_count(); ++i) {
      const double exact = forced_deviation(kPi / 2.0, 0.0, g.time(i), g.t_max(), mu, 0.05, 1.0, 0.3);
      err = std::max(err, std::abs(field.deviation(g.label_index(4, mid), i) - exact));
    }
    return err;
  };
  const double err_coarse = mid_error(0.05);
  CHECK(err_coarse < 1e-9);
  // Cubic product rule: halving dt cuts the error by about 16.
  CHECK(err_coarse / mid_error(0.025) > 12.0);

  const Grid g = small_grid();
  const CharacteristicSolver solver(g, WeightSpec::exponential(0.9));
  const auto z = decaying_path(g, 0.05, 1.0, 0.3);
  const auto field = solver.apply_F(CharacteristicField(g), z, mu);

  // Every label with moderate omega.
  double err = 0.0;
  for (std::size_t l = 0; l < g.omega_count(); ++l) {
    const double om = g.omega_nodes()[l].omega;
    if (std::abs(om) > 20.0) continue;
    for (std::size_t j = 0; j < g.theta_count(); ++j) {
      for (std::size_t i = 0; i < g.time_count(); i += 7) {
        const double exact = forced_deviation(g.theta(j), om, g.time(i), g.t_max(), mu, 0.05, 1.0, 0.3);
        err = std::max(err, std::abs(field.deviation(g.label_index(j, l), i) - exact));
      }
    }
  }
  CHECK(err < 1e-9);
}

TEST_CASE("zero coupling leaves the free flow untouched") {
  const Grid g = small_grid(4.0);
  const CharacteristicSolver solver(g, WeightSpec::exponential(0.9));
  const auto z = decaying_path(g, 0.05, 1.0);
  const auto field = solver.apply_F(CharacteristicField(g), z, 0.0);
  for (double d : field.values()) REQUIRE(d == 0.0);
  const auto fp = solver.solve_fixed_point(z, 0.0, 1e-13, 10);
  for (double d : fp.field.values()) REQUIRE(d == 0.0);
}

TEST_CASE("Picard iteration contracts at the predicted rate") {
  const Grid g = small_grid();
  const auto w = WeightSpec::exponential(0.9);
  const CharacteristicSolver solver(g, w);
  const double mu = 0.5;
  const auto z = decaying_path(g, 0.3, 1.0, 0.2);
  const auto fp = solver.solve_fixed_point(z, mu, 1e-13, 200);
  const auto& rep = fp.report;
  CHECK(rep.predicted_factor == doctest::Approx(mu * z.norm(w) / 0.9));
  CHECK(rep.ratios_within(0.05));
  CHECK(rep.deviation_within(0.05));
  CHECK(rep.residuals.back() < 1e-13);
  // The result is a fixed point of F.
  const auto again = solver.apply_F(fp.field, z, mu);
  double diff = 0.0;
  for (std::size_t k = 0; k < again.values().size(); ++k) {
    diff = std::max(diff, std::abs(again.values()[k] - fp.field.values()[k]));
  }
  CHECK(diff < 1e-12);
}

TEST_CASE("a non-contractive forcing is refused") {
  const Grid g = small_grid(4.0);
  const auto w = WeightSpec::exponential(0.9);
  const CharacteristicSolver solver(g, w);
  const auto z = decaying_path(g, 1.0, 1.0);
  CHECK_THROWS_AS(solver.solve_fixed_point(z, 2.0, 1e-13, 50), NonContractive);
}

TEST_CASE("backward RK4 oracle agrees with the Picard fixed point") {
  const Grid g = small_grid(8.0, 17);
  const auto w = WeightSpec::exponential(0.9);
  const CharacteristicSolver solver(g, w);
  const double mu = 0.3;
  const auto z = decaying_path(g, 0.2, 1.0, 0.4);
  const auto fp = solver.solve_fixed_point(z, mu, 1e-13, 200);
  const auto oracle = solver.backward_ode_oracle(z, mu);
  // The grid step resolves the phase only where |omega| dt is small; the outer Lorentzian nodes are not.
  double resolved = 0.0, unresolved = 0.0;
  for (std::size_t l = 0; l < g.omega_count(); ++l) {
    const bool ok = std::abs(g.omega_nodes()[l].omega) * g.dt() <= 0.5;
    for (std::size_t j = 0; j < g.theta_count(); ++j) {
      for (std::size_t i = 0; i < g.time_count(); ++i) {
        const auto label = g.label_index(j, l);
        const double d = std::abs(oracle.deviation(label, i) - fp.field.deviation(label, i));
        (ok ? resolved : unresolved) = std::max(ok ? resolved : unresolved, d);
      }
    }
  }
  CHECK(resolved < 2e-8);
  CHECK(unresolved < 1e-4);
}

TEST_CASE("characteristics are equivariant under a frequency shift") {
  // Shifting omega by nu and rotating z by e^{i nu t} leaves Theta - theta - omega t unchanged,
  // up to the cubic interpolation of the rotated path (O(dt^4 nu^4)).
  const Grid g = small_grid(6.0, 17);
  const CharacteristicSolver solver(g, WeightSpec::exponential(0.9));
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> th(0.0, 2.0 * kPi), om(-3.0, 3.0), nu(-2.0, 2.0);
  for (int trial = 0; trial < 6; ++trial) {
    const double theta = th(gen), omega = om(gen), shift = nu(gen);
    const auto z = decaying_path(g, 0.3, 1.0, 0.5);
    auto rotated = z;
    for (std::size_t i = 0; i < z.size(); ++i) rotated.z[i] *= std::polar(1.0, shift * z.times[i]);
    const auto a = solver.oracle_trajectory(theta, omega, z, 0.4);
    const auto b = solver.oracle_trajectory(theta, omega + shift, rotated, 0.4);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    CHECK(diff < 5e-7);
  }
}

TEST_CASE("beta is the tail integral of R") {
  const Grid g = small_grid(6.0, 9);
  const CharacteristicSolver solver(g, WeightSpec::exponential(0.9));
  const auto z = decaying_path(g, 0.05, 1.0);
  const auto b = solver.beta(z);
  double err = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) err = std::max(err, std::abs(b[i] - 0.05 * (std::exp(-g.time(i)) - std::exp(-g.t_max()))));
  CHECK(err < 1e-8);
  CHECK(b.back() == 0.0);
  const Grid fine = Grid::build(GridSpec{0.025, 6.0, 16, 9}, FrequencyProfile::lorentzian(1.0));
  const auto bf = CharacteristicSolver(fine, WeightSpec::exponential(0.9)).beta(decaying_path(fine, 0.05, 1.0));
  double err_fine = 0.0;
  for (std::size_t i = 0; i < bf.size(); ++i) err_fine = std::max(err_fine, std::abs(bf[i] - 0.05 * (std::exp(-fine.time(i)) - std::exp(-fine.t_max()))));
  CHECK(err / err_fine > 12.0);
}

TEST_CASE("gamma stays below beta along the fixed point") {
  const Grid g = small_grid(8.0, 17);
  const CharacteristicSolver solver(g, WeightSpec::exponential(0.9));
  const auto z = decaying_path(g, 0.1, 1.0, 0.3);
  const auto fp = solver.solve_fixed_point(z, 0.2, 1e-13, 200);
  const auto rep = solver.gamma_beta_check(fp.field, z, 0.2);
  CHECK(rep.passed);
  CHECK(rep.beta_nonincreasing);
  CHECK(rep.max_ratio <= 1.0 + 1e-3);
}

TEST_CASE("fields from another grid are rejected") {
  const Grid a = small_grid(4.0, 9);
  const Grid b = small_grid(4.0, 17);
  const CharacteristicSolver solver(a, WeightSpec::exponential(0.9));
  CHECK_THROWS_AS(solver.apply_F(CharacteristicField(b), decaying_path(a, 0.05, 1.0), 0.1), GridMismatch);
  CHECK_THROWS_AS(solver.apply_F(CharacteristicField(a), decaying_path(small_grid(5.0, 9), 0.05, 1.0), 0.1), GridMismatch);
}

TEST_CASE("path interpolation reproduces nodes and cubics") {
  std::vector<complex> v(11);
  auto f = [](double t) { return complex(1.0 + t - 0.5 * t * t + 0.1 * t * t * t, 2.0 * t); };
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(0.2 * static_cast<double>(i));
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(interpolate_path(v, 0.2, 0.2 * i) - v[i]) < 1e-14);
  for (double t : {0.05, 0.33, 1.01, 1.97}) CHECK(std::abs(interpolate_path(v, 0.2, t) - f(t)) < 1e-12);
}

TEST_CASE("results do not depend on the worker count") {
  const Grid g = small_grid(6.0, 17);
  const CharacteristicSolver solver(g, WeightSpec::exponential(0.9));
  const auto z = decaying_path(g, 0.2, 1.0, 0.1);
  const char* saved = std::getenv("DEPHASE_THREADS");
  const std::string restore = saved ? saved : "";
  ::setenv("DEPHASE_THREADS", "1", 1);
  const auto one = solver.solve_fixed_point(z, 0.3, 1e-13, 200);
  ::setenv("DEPHASE_THREADS", "3", 1);
  const auto three = solver.solve_fixed_point(z, 0.3, 1e-13, 200);
  if (saved) {
    ::setenv("DEPHASE_THREADS", restore.c_str(), 1);
  } else {
    ::unsetenv("DEPHASE_THREADS");
  }
  bool same = true;
  for (std::size_t k = 0; k < one.field.values().size(); ++k) same = same && one.field.values()[k] == three.field.values()[k];
  CHECK(same);
}
