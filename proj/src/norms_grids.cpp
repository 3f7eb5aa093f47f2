#include "dephase/norms_grids.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/beta.hpp>
#include <fmt/core.h>

namespace dephase {

namespace {

constexpr double kPi = std::numbers::pi;

void append_legendre(std::vector<OmegaNode>& out, int n, double a, double b,
                     const FrequencyProfile& profile) {
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  for (int i = 0; i < n; ++i) {
    OmegaNode node;
    node.omega = mid + half * x[i];
    node.weight = half * w[i];
    node.mass = node.weight * profile.density(node.omega);
    out.push_back(node);
  }
}

}  // namespace

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre needs n >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      // p1 = P_n(x), p0 = P_{n-1}(x)
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double wi = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = wi;
    weights[n - 1 - i] = wi;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

Grid Grid::build(const GridSpec& spec, const FrequencyProfile& profile) {
  if (!(spec.dt > 0.0) || !(spec.t_max > 0.0)) {
    throw std::invalid_argument("grid needs dt > 0 and t_max > 0");
  }
  const double steps = spec.t_max / spec.dt;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps) || rounded < 1.0) {
    throw std::invalid_argument("t_max / dt must be an integer");
  }
  if (spec.theta_nodes < 8) {
    throw QuadratureError(
        fmt::format("theta quadrature needs at least 8 nodes, got {}", spec.theta_nodes));
  }
  if (spec.omega_nodes < 2) throw std::invalid_argument("omega rule needs at least 2 nodes");

  Grid g;
  g.spec_ = spec;
  g.dt_ = spec.dt;
  g.n_times_ = static_cast<std::size_t>(rounded) + 1;
  g.t_max_ = static_cast<double>(g.n_times_ - 1) * spec.dt;
  g.n_theta_ = static_cast<std::size_t>(spec.theta_nodes);
  g.profile_kind_ = profile.kind();
  g.profile_parameter_ = profile.parameter();

  const double p = profile.parameter();
  const int n = spec.omega_nodes;
  switch (profile.kind()) {
    case ProfileKind::Gaussian: {
      const double cutoff = spec.omega_cutoff > 0.0 ? spec.omega_cutoff : 6.5 * p;
      append_legendre(g.omega_, n, -cutoff, cutoff, profile);
      break;
    }
    case ProfileKind::Laplace: {
      // Split at the kink of e^{-|omega|}.
      const double cutoff = spec.omega_cutoff > 0.0 ? spec.omega_cutoff : 21.0 * p;
      append_legendre(g.omega_, (n + 1) / 2, -cutoff, 0.0, profile);
      append_legendre(g.omega_, n / 2, 0.0, cutoff, profile);
      break;
    }
    case ProfileKind::Lorentzian: {
      // omega = s tan(u): g(omega) d omega = du / pi exactly.
      std::vector<double> x, w;
      gauss_legendre(n, x, w);
      for (int i = 0; i < n; ++i) {
        const double u = 0.5 * kPi * x[i];
        const double wu = 0.5 * kPi * w[i];
        const double c = std::cos(u);
        OmegaNode node;
        node.omega = p * std::tan(u);
        node.weight = wu * p / (c * c);
        node.mass = wu / kPi;
        g.omega_.push_back(node);
      }
      break;
    }
  }
  return g;
}

std::vector<double> Grid::times() const {
  std::vector<double> t(n_times_);
  for (std::size_t i = 0; i < n_times_; ++i) t[i] = time(i);
  return t;
}

double Grid::theta(std::size_t j) const {
  return 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n_theta_);
}

double Grid::theta_weight() const { return 2.0 * kPi / static_cast<double>(n_theta_); }

double Grid::omega_mass() const {
  double s = 0.0;
  for (const auto& node : omega_) s += node.mass;
  return s;
}

bool Grid::same_as(const Grid& other) const {
  if (n_times_ != other.n_times_ || n_theta_ != other.n_theta_ ||
      omega_.size() != other.omega_.size() || dt_ != other.dt_) {
    return false;
  }
  for (std::size_t l = 0; l < omega_.size(); ++l) {
    if (omega_[l].omega != other.omega_[l].omega || omega_[l].mass != other.omega_[l].mass) {
      return false;
    }
  }
  return true;
}

QuadratureReport check_quadrature(const Grid& grid, const AsymptoticState& state) {
  QuadratureReport r;
  r.omega_mass = grid.omega_mass();
  r.theta_nodes = static_cast<int>(grid.theta_count());
  // e^{i theta} f_inf carries modes up to max_mode + 1; the uniform rule is
  // exact for |k| < M, and never fewer than 8 nodes.
  r.required_theta_nodes = std::max(8, state.max_mode() + 2);

  double theta_mean = 0.0;
  for (std::size_t j = 0; j < grid.theta_count(); ++j) theta_mean += state.theta_factor(grid.theta(j));
  theta_mean /= static_cast<double>(grid.theta_count());
  r.label_mass = r.omega_mass * theta_mean;
  r.mass_error = std::abs(r.label_mass - 1.0);

  if (r.theta_nodes < r.required_theta_nodes) {
    r.message = fmt::format("theta rule too coarse: {} nodes, need >= {}", r.theta_nodes,
                            r.required_theta_nodes);
  } else if (!(r.mass_error <= grid.spec().mass_tol)) {
    r.message = fmt::format("label quadrature mass {:.17g} misses 1 by {:.3e} > {:.3e}",
                            r.label_mass, r.mass_error, grid.spec().mass_tol);
  } else if (grid.profile_kind() != state.profile().kind() ||
             grid.profile_parameter() != state.profile().parameter()) {
    r.message = "grid omega rule was built for a different frequency profile";
  } else {
    r.passed = true;
    r.message = "ok";
  }
  return r;
}

void require_quadrature(const Grid& grid, const AsymptoticState& state) {
  const auto r = check_quadrature(grid, state);
  if (!r.passed) throw QuadratureError("quadrature mass check failed: " + r.message);
}

WeightSpec::WeightSpec(WeightKind kind, double rate) : kind_(kind), rate_(rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("weight rate must be > 0");
}

WeightSpec WeightSpec::exponential(double lambda) { return {WeightKind::Exponential, lambda}; }
WeightSpec WeightSpec::polynomial(double gamma) { return {WeightKind::Polynomial, gamma}; }

std::string WeightSpec::name() const {
  return kind_ == WeightKind::Exponential ? fmt::format("exp(lambda={})", rate_)
                                          : fmt::format("poly(gamma={})", rate_);
}

double WeightSpec::operator()(double t) const {
  if (kind_ == WeightKind::Exponential) return std::exp(rate_ * t);
  return std::pow(1.0 + t * t, 0.5 * rate_);
}

double WeightSpec::tail_integral(double T) const {
  if (T < 0.0) throw std::invalid_argument("tail integral needs T >= 0");
  if (kind_ == WeightKind::Exponential) return std::exp(-rate_ * T) / rate_;
  if (rate_ <= 1.0) return std::numeric_limits<double>::infinity();
  // s = tan(u): int_T^inf <s>^{-g} ds = int_{atan T}^{pi/2} cos^{g-2} u du
  //           = B((g-1)/2, 1/2) I_{1/(1+T^2)}((g-1)/2, 1/2) / 2.
  const double a = 0.5 * (rate_ - 1.0);
  const double x = 1.0 / (1.0 + T * T);
  return 0.5 * boost::math::beta(a, 0.5, x);  // non-normalised incomplete beta
}

WeightSpec WeightSpec::deviation_weight() const {
  if (kind_ == WeightKind::Exponential) return *this;
  return polynomial(rate_ - 1.0);
}

namespace {

template <typename T>
double weighted_sup(std::span<const T> values, std::span<const double> times, const WeightSpec& w,
                    std::size_t stride) {
  if (values.empty() || times.empty()) throw std::invalid_argument("weighted_norm of empty path");
  if (values.size() % stride != 0 || stride != times.size()) {
    throw GridMismatch("weighted_norm: values and times have incompatible sizes");
  }
  std::vector<double> wt(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) wt[i] = w(times[i]);
  double m = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    m = std::max(m, std::abs(values[k]) * wt[k % stride]);
  }
  return m;
}

}  // namespace

double weighted_norm(std::span<const double> values, std::span<const double> times,
                     const WeightSpec& w) {
  if (values.size() != times.size()) throw GridMismatch("weighted_norm: size mismatch");
  return weighted_sup(values, times, w, times.size());
}

double weighted_norm(std::span<const std::complex<double>> values,
                     std::span<const double> times, const WeightSpec& w) {
  if (values.size() != times.size()) throw GridMismatch("weighted_norm: size mismatch");
  return weighted_sup(values, times, w, times.size());
}

double weighted_field_norm(std::span<const double> field, std::span<const double> times,
                           const WeightSpec& w) {
  return weighted_sup(field, times, w, times.size());
}

double tail_bound(double T, double norm_value, const WeightSpec& w) {
  if (T < 0.0) throw std::invalid_argument("tail_bound needs T >= 0");
  if (norm_value == 0.0) return 0.0;
  return norm_value * w.tail_integral(T);
}

double deviation_bound_constant(const WeightSpec& w) {
  if (w.kind() == WeightKind::Exponential) return 1.0 / w.rate();
  const WeightSpec dev = w.deviation_weight();
  // t -> infinity limit is 1 / (gamma - 1); the sup is otherwise attained
  // at moderate t, which a dense scan covers.
  double best = 1.0 / (w.rate() - 1.0);
  for (int i = 0; i <= 20000; ++i) {
    const double t = 0.005 * i;
    best = std::max(best, dev(t) * w.tail_integral(t));
  }
  return best;
}

}  // namespace dephase
