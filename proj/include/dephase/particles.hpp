#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "dephase/characteristics.hpp"
#include "dephase/norms_grids.hpp"
#include "dephase/spectral_state.hpp"

namespace dephase {

/// Finite-N Kuramoto population: theta_i' = omega_i - mu R_N sin(theta_i - phi_N).
struct ParticleEnsemble {
  std::vector<double> theta;  // in [0, 2 pi)
  std::vector<double> omega;
  double mu = 0.0;
  double t = 0.0;

  std::size_t size() const { return theta.size(); }
};

/// (1/N) sum_j e^{i theta_j}, summed in fixed chunks so the result does not
/// depend on the thread count.
std::complex<double> empirical_order_parameter(const ParticleEnsemble& ens);

/// One classical RK4 step with the mean field recomputed at every stage.
ParticleEnsemble step(ParticleEnsemble ens, double dt);
void step_in_place(ParticleEnsemble& ens, double dt);

struct ParticleInit {
  ParticleEnsemble ensemble;
  std::size_t resampled = 0;  // labels redrawn because omega fell outside the node range
};

/// Samples labels from f_inf and maps them through Theta(0, theta, omega), with D
/// interpolated bilinearly (periodic in theta, between omega nodes).
ParticleInit init_from_solution(const CharacteristicField& theta, const Grid& grid,
                                const AsymptoticState& state, double mu, std::size_t n,
                                std::uint64_t seed);

struct ParticleTrace {
  std::vector<double> t;
  std::vector<std::complex<double>> z;
};

/// Integrates to t_end with step dt, recording z_N every `record_every` steps
/// (and at t = 0).
ParticleTrace simulate(ParticleEnsemble ens, double dt, double t_end, int record_every = 1);

}  // namespace dephase
