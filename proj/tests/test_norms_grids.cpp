#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "dephase/norms_grids.hpp"
#include "dephase/spectral_state.hpp"

using namespace dephase;

namespace {

std::vector<double> uniform_times(double dt, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = dt * static_cast<double>(i);
  return t;
}

std::vector<double> random_path(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = g(gen) * std::exp(-0.03 * static_cast<double>(i));
  return v;
}

// int_T^b (1 + s^2)^{-gamma/2} ds by Simpson, plus the closed-form far tail of s^{-gamma}.
double polynomial_tail_numeric(double T, double gamma) {
  const double b = 2000.0;
  const int n = 2000000;
  const double h = (b - T) / n;
  auto f = [&](double s) { return std::pow(1.0 + s * s, -0.5 * gamma); };
  double sum = f(T) + f(b);
  for (int i = 1; i < n; ++i) sum += f(T + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0 + std::pow(b, 1.0 - gamma) / (gamma - 1.0);
}

}  // namespace

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly") {
  for (int n : {1, 2, 5, 16, 64}) {
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    REQUIRE(x.size() == static_cast<std::size_t>(n));
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += w[i] * std::pow(x[i], p);
      const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
      CHECK(std::abs(s - exact) < 1e-13);
    }
  }
}

TEST_CASE("omega rules carry unit mass for every profile") {
  for (auto p : {FrequencyProfile::gaussian(1.0), FrequencyProfile::lorentzian(1.0), FrequencyProfile::laplace(1.0)}) {
    const Grid g = Grid::build(GridSpec{}, p);
    CHECK(std::abs(g.omega_mass() - 1.0) < 1e-8);
    CHECK(g.time_count() == 401);
    CHECK(g.t_max() == doctest::Approx(20.0));
    CHECK(g.label_count() == 64u * 129u);
  }
}

TEST_CASE("label indices are omega-major") {
  const Grid g = Grid::build(GridSpec{0.1, 1.0, 16, 9}, FrequencyProfile::gaussian(1.0));
  CHECK(g.label_index(0, 0) == 0u);
  CHECK(g.label_index(3, 0) == 3u);
  CHECK(g.label_index(0, 1) == 16u);
  CHECK(g.label_index(15, 8) == 16u * 9u - 1u);
}

TEST_CASE("too few theta nodes is a quadrature error") {
  GridSpec s;
  s.theta_nodes = 4;
  CHECK_THROWS_AS(Grid::build(s, FrequencyProfile::lorentzian(1.0)), QuadratureError);
}

TEST_CASE("quadrature check flags modes the theta grid cannot resolve") {
  const auto p = FrequencyProfile::laplace(1.0);
  GridSpec s{0.1, 2.0, 8, 33};
  const Grid g = Grid::build(s, p);
  const AsymptoticState low(p, {{1, {0.1, 0.0}}}, {DecayKind::Sobolev, 2.0});
  const AsymptoticState high(p, {{9, {0.1, 0.0}}}, {DecayKind::Sobolev, 2.0});
  CHECK(check_quadrature(g, low).passed);
  CHECK_FALSE(check_quadrature(g, high).passed);
  CHECK_THROWS_AS(require_quadrature(g, high), QuadratureError);
}

TEST_CASE("weights and their tail integrals") {
  const auto e = WeightSpec::exponential(0.9);
  CHECK(e(0.0) == 1.0);
  CHECK(e(2.0) == doctest::Approx(std::exp(1.8)));
  for (double T : {0.0, 1.0, 7.5}) CHECK(e.tail_integral(T) == doctest::Approx(std::exp(-0.9 * T) / 0.9).epsilon(1e-14));

  for (double gamma : {2.0, 2.5, 3.0}) {
    const auto p = WeightSpec::polynomial(gamma);
    CHECK(p(3.0) == doctest::Approx(std::pow(10.0, 0.5 * gamma)));
    for (double T : {0.0, 1.0, 10.0, 40.0}) {
      CHECK(p.tail_integral(T) == doctest::Approx(polynomial_tail_numeric(T, gamma)).epsilon(1e-7));
    }
  }
  CHECK(WeightSpec::polynomial(2.0).deviation_weight().rate() == doctest::Approx(1.0));
  CHECK(WeightSpec::exponential(0.9).deviation_weight().rate() == doctest::Approx(0.9));
}

TEST_CASE("deviation bound constant is 1/lambda for exponential weights") {
  CHECK(deviation_bound_constant(WeightSpec::exponential(0.9)) == doctest::Approx(1.0 / 0.9));
  // Polynomial: sup_t <t>^{gamma-1} int_t^inf <s>^{-gamma} ds, finite and at least the t = 0 value.
  const auto p = WeightSpec::polynomial(2.0);
  const double k = deviation_bound_constant(p);
  CHECK(std::isfinite(k));
  CHECK(k >= p.tail_integral(0.0) - 1e-12);
}

TEST_CASE("weighted norm is absolutely homogeneous and subadditive") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> scale(-5.0, 5.0);
  const auto times = uniform_times(0.05, 200);
  for (const auto& w : {WeightSpec::exponential(0.9), WeightSpec::polynomial(2.0)}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto a = random_path(gen, times.size());
      const auto b = random_path(gen, times.size());
      const double c = scale(gen);
      std::vector<double> ca(a.size()), sum(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        ca[i] = c * a[i];
        sum[i] = a[i] + b[i];
      }
      const double na = weighted_norm(a, times, w);
      CHECK(weighted_norm(ca, times, w) == doctest::Approx(std::abs(c) * na).epsilon(1e-14));
      CHECK(weighted_norm(sum, times, w) <= na + weighted_norm(b, times, w) + 1e-14);
    }
  }
}

TEST_CASE("weighted norm of a pure decay equals its amplitude") {
  const auto times = uniform_times(0.05, 401);
  std::vector<std::complex<double>> z(times.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::polar(0.05 * std::exp(-times[i]), 0.3 * times[i]);
  CHECK(weighted_norm(z, times, WeightSpec::exponential(1.0)) == doctest::Approx(0.05).epsilon(1e-13));
  // With a weaker weight the sup sits at t = 0.
  CHECK(weighted_norm(z, times, WeightSpec::exponential(0.5)) == doctest::Approx(0.05).epsilon(1e-13));
  CHECK_THROWS_AS(weighted_norm(std::vector<double>{}, std::vector<double>{}, WeightSpec::exponential(1.0)),
                  std::invalid_argument);
}

TEST_CASE("tail bound is monotone in T and linear in the norm") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (const auto& w : {WeightSpec::exponential(0.9), WeightSpec::polynomial(2.0), WeightSpec::polynomial(3.5)}) {
    for (int trial = 0; trial < 100; ++trial) {
      double a = u(gen), b = u(gen);
      if (a > b) std::swap(a, b);
      CHECK(tail_bound(b, 1.0, w) <= tail_bound(a, 1.0, w));
      CHECK(tail_bound(a, 3.0, w) == doctest::Approx(3.0 * tail_bound(a, 1.0, w)));
    }
  }
}
