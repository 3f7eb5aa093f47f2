#include "dephase/particles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dephase {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kChunk = 4096;

double wrap(double x) {
  double y = x;
  if (y < 0.0 || y >= kTwoPi) {
    y = std::fmod(x, kTwoPi);
    if (y < 0.0) y += kTwoPi;
  }
  return y >= kTwoPi ? 0.0 : y;
}

complex cis(double x) {
  double sn, cs;
  ::sincos(x, &sn, &cs);
  return {cs, sn};
}

// e^{ix} for the small stage corrections; Taylor to x^9 is exact in double for |x| <= 0.05.
complex cis_small(double x) {
  if (std::abs(x) > 0.05) return cis(x);
  const double x2 = x * x;
  const double c = 1.0 - x2 / 2.0 * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0 * (1.0 - x2 / 56.0 * (1.0 - x2 / 90.0))));
  const double s = x * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0))));
  return {c, s};
}

// Plain product without the NaN recovery path of operator*.
inline complex mul(complex a, complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// Mean of p over fixed chunks, so the sum order does not depend on the thread count.
complex chunked_mean(const std::vector<complex>& p) {
  const std::size_t n = p.size();
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<complex> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    double re = 0.0, im = 0.0;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < end; ++k) {
      re += p[k].real();
      im += p[k].imag();
    }
    partial[c] = {re, im};
  });
  double re = 0.0, im = 0.0;
  for (const auto& v : partial) {
    re += v.real();
    im += v.imag();
  }
  return {re / static_cast<double>(n), im / static_cast<double>(n)};
}

// RK4 on theta_j' = omega_j + g_j with g_j = -mu Im(conj(z) e^{i theta_j}). The free
// rotation e^{i omega_j h} is cached per particle, so a stage only needs e^{i h g_j}
// for the small coupling correction. Phasors are refreshed from theta periodically.
class Stepper {
 public:
  Stepper(const ParticleEnsemble& ens, double dt) : dt_(dt) {
    const std::size_t n = ens.size();
    half_.resize(n);
    full_.resize(n);
    p_.resize(n);
    q_.resize(n);
    g1_.resize(n);
    g2_.resize(n);
    g3_.resize(n);
    parallel_for(chunks(n), [&](std::size_t c) {
      for (std::size_t k = c * kChunk; k < std::min(n, (c + 1) * kChunk); ++k) {
        half_[k] = cis(0.5 * dt * ens.omega[k]);
        full_[k] = cis(dt * ens.omega[k]);
        p_[k] = cis(ens.theta[k]);
      }
    });
  }

  void advance(ParticleEnsemble& ens) {
    const std::size_t n = ens.size();
    const double mu = ens.mu;
    const double h = 0.5 * dt_;
    force(p_, mu, g1_);
    stage(h, half_, g1_);
    force(q_, mu, g2_);
    stage(h, half_, g2_);
    force(q_, mu, g3_);
    stage(dt_, full_, g3_);
    const complex z4 = chunked_mean(q_);
    const bool refresh = ++steps_ % kRefresh == 0;
    parallel_for(chunks(n), [&](std::size_t c) {
      for (std::size_t k = c * kChunk; k < std::min(n, (c + 1) * kChunk); ++k) {
        const double g4 = -mu * (z4.real() * q_[k].imag() - z4.imag() * q_[k].real());
        const double delta = dt_ / 6.0 * (g1_[k] + 2.0 * g2_[k] + 2.0 * g3_[k] + g4);
        ens.theta[k] = wrap(ens.theta[k] + dt_ * ens.omega[k] + delta);
        p_[k] = refresh ? cis(ens.theta[k]) : mul(mul(p_[k], full_[k]), cis_small(delta));
      }
    });
    ens.t += dt_;
  }

 private:
  static constexpr int kRefresh = 32;

  static std::size_t chunks(std::size_t n) { return (n + kChunk - 1) / kChunk; }

  void force(const std::vector<complex>& x, double mu, std::vector<double>& g) const {
    const complex z = chunked_mean(x);
    for (std::size_t k = 0; k < x.size(); ++k) g[k] = -mu * (z.real() * x[k].imag() - z.imag() * x[k].real());
  }

  // q = p e^{i omega h} e^{i h g}
  void stage(double h, const std::vector<complex>& rot, const std::vector<double>& g) {
    for (std::size_t k = 0; k < p_.size(); ++k) q_[k] = mul(mul(p_[k], rot[k]), cis_small(h * g[k]));
  }

  double dt_;
  long steps_ = 0;
  std::vector<complex> half_, full_, p_, q_;
  std::vector<double> g1_, g2_, g3_;
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

complex empirical_order_parameter(const ParticleEnsemble& ens) {
  if (ens.size() == 0) throw std::invalid_argument("empty ensemble");
  std::vector<complex> p(ens.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = cis(ens.theta[k]);
  return chunked_mean(p);
}

void step_in_place(ParticleEnsemble& ens, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step needs dt > 0");
  if (ens.size() == 0) return;
  Stepper(ens, dt).advance(ens);
}

ParticleEnsemble step(ParticleEnsemble ens, double dt) {
  step_in_place(ens, dt);
  return ens;
}

ParticleInit init_from_solution(const CharacteristicField& theta, const Grid& grid,
                                const AsymptoticState& state, double mu, std::size_t n,
                                std::uint64_t seed) {
  if (!theta.compatible_with(grid)) throw GridMismatch("characteristic field does not match grid");
  if (n == 0) throw std::invalid_argument("init_from_solution needs n >= 1");

  const auto& nodes = grid.omega_nodes();
  const double lo = nodes.front().omega;
  const double hi = nodes.back().omega;

  ParticleInit out;
  std::vector<Label> labels = sample_labels(state, n, seed);
  std::vector<std::size_t> bad;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k].omega < lo || labels[k].omega > hi) bad.push_back(k);
  }
  out.resampled = bad.size();
  for (std::uint64_t round = 1; !bad.empty(); ++round) {
    const auto extra = sample_labels(state, bad.size(), splitmix(seed + round));
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < bad.size(); ++k) {
      if (extra[k].omega < lo || extra[k].omega > hi) {
        still.push_back(bad[k]);
      } else {
        labels[bad[k]] = extra[k];
      }
    }
    out.resampled += still.size();
    bad = std::move(still);
  }

  const std::size_t m = grid.theta_count();
  const double dtheta = kTwoPi / static_cast<double>(m);
  auto& ens = out.ensemble;
  ens.mu = mu;
  ens.theta.resize(n);
  ens.omega.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double th = wrap(labels[k].theta);
    const double om = labels[k].omega;
    const double xj = th / dtheta;
    const auto j0 = std::min(static_cast<std::size_t>(xj), m - 1);
    const std::size_t j1 = (j0 + 1) % m;
    const double a = xj - static_cast<double>(j0);
    auto it = std::upper_bound(nodes.begin(), nodes.end(), om,
                               [](double v, const OmegaNode& node) { return v < node.omega; });
    std::size_t l1 = static_cast<std::size_t>(it - nodes.begin());
    l1 = std::clamp<std::size_t>(l1, 1, nodes.size() - 1);
    const std::size_t l0 = l1 - 1;
    const double b = (om - nodes[l0].omega) / (nodes[l1].omega - nodes[l0].omega);
    auto d = [&](std::size_t j, std::size_t l) { return theta.deviation(grid.label_index(j, l), 0); };
    const double dev = (1.0 - a) * (1.0 - b) * d(j0, l0) + a * (1.0 - b) * d(j1, l0) +
                       (1.0 - a) * b * d(j0, l1) + a * b * d(j1, l1);
    ens.theta[k] = wrap(th + dev);
    ens.omega[k] = om;
  }
  return out;
}

ParticleTrace simulate(ParticleEnsemble ens, double dt, double t_end, int record_every) {
  if (!(dt > 0.0) || !(t_end >= 0.0) || record_every < 1) {
    throw std::invalid_argument("simulate needs dt > 0, t_end >= 0, record_every >= 1");
  }
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  ParticleTrace trace;
  const double t0 = ens.t;
  trace.t.push_back(t0);
  trace.z.push_back(empirical_order_parameter(ens));
  Stepper stepper(ens, dt);
  for (std::size_t s = 1; s <= steps; ++s) {
    stepper.advance(ens);
    if (s % static_cast<std::size_t>(record_every) == 0) {
      trace.t.push_back(t0 + static_cast<double>(s) * dt);
      trace.z.push_back(empirical_order_parameter(ens));
    }
  }
  return trace;
}

}  // namespace dephase
