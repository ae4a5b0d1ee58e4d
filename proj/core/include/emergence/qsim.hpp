#pragma once

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "emergence/body.hpp"
#include "emergence/potentials.hpp"

// Two-atom quantum dynamics on a (X, xi) grid, X the pair CM and xi the
// separation. Total mass M = 2m, reduced mass mu = m/2. Propagation is
// Strang-split FFT (half potential kick, full kinetic step in momentum
// space, half kick); plans are created with FFTW_ESTIMATE so runs are
// deterministic.
//
// The grid potential is V(X + xi/2) + V(X - xi/2) + u(|xi|): the external
// potential seen by each atom plus the pair interaction. For harmonic and
// gravity externals this separates exactly into f(X) + g(xi), so an
// initially product wavefunction stays product and the reduced CM state
// stays pure; anharmonic externals generate X-xi cross terms and the
// purity decays. Those statements are what the factorization experiment
// measures.

namespace emergence {

struct QuantumParams {
  double hbar = 1.0;
  double dt = 1e-3;
  long n_steps = 1000;
  int nx = 256;         // grid points along X
  int nxi = 256;        // grid points along xi
  double extent_x = 20.0;   // total box length along X, centred on 0
  double extent_xi = 20.0;  // total box length along xi, centred on 0
  long record_stride = 1;   // stride for heavy records (purity)

  void validate() const;
};

// Product Gaussian packet: variance sigma^2 in position density per
// factor, carrier momenta hbar k.
struct WavepacketSpec {
  double x0 = 0.0, sigma_x = 1.0, k_x = 0.0;
  double xi0 = 0.0, sigma_xi = 1.0, k_xi = 0.0;
};

struct WaveFunction2P {
  Eigen::MatrixXcd amp;  // nx x nxi; amp(i, j) = psi(x_i, xi_j)
  double dx = 0.0, dxi = 0.0;
  double x_min = 0.0, xi_min = 0.0;

  double x_at(int i) const { return x_min + i * dx; }
  double xi_at(int j) const { return xi_min + j * dxi; }
  double norm_squared() const { return amp.squaredNorm() * dx * dxi; }
};

WaveFunction2P make_packet(const QuantumParams& params, const WavepacketSpec& packet);

// Grid potential plus the kinetic dispersion tables the propagator needs.
struct HamiltonianTerms {
  Eigen::ArrayXXd potential;   // nx x nxi
  Eigen::ArrayXd kinetic_x;    // hbar^2 kx^2 / (2M), length nx
  Eigen::ArrayXd kinetic_xi;   // hbar^2 kxi^2 / (2mu), length nxi
  double mass_total = 0.0;
  double mass_reduced = 0.0;
};

// Throws ConfigError if the potential is singular (non-finite) anywhere on
// the grid, e.g. Lennard-Jones across xi = 0.
HamiltonianTerms build_hamiltonian_terms(const ExternalPotential& external,
                                         const PairPotential& pair,
                                         const QuantumParams& params,
                                         const BodyConfig& cfg);

struct QuantumExpectations {
  double norm = 0.0;       // integral of |psi|^2
  double x_mean = 0.0, p_mean = 0.0;
  double x_var = 0.0, p_var = 0.0;
  double xi_mean = 0.0, xi_var = 0.0;
  double energy = 0.0;     // <T> + <V>
};

// Reduced CM density matrix rho(X, X') = integral dxi psi(X, xi)
// conj(psi(X', xi)), discretized with the grid measure.
struct ReducedCmState {
  Eigen::MatrixXcd rho;  // nx x nx, Hermitian
  double dx = 0.0;

  double trace() const;
  double purity() const;  // Tr rho^2 = sum |rho|^2 dx^2
};

ReducedCmState reduce_cm(const WaveFunction2P& psi);

struct QuantumRunRecord;

class SplitOperatorPropagator {
 public:
  SplitOperatorPropagator(const QuantumParams& params, const HamiltonianTerms& terms);
  ~SplitOperatorPropagator();

  SplitOperatorPropagator(const SplitOperatorPropagator&) = delete;
  SplitOperatorPropagator& operator=(const SplitOperatorPropagator&) = delete;

  // One Strang step in place. Unitary up to rounding.
  void step(WaveFunction2P& psi);

  // Spectral expectations (momentum moments via FFT, potential moments on
  // the grid). Does not modify psi.
  QuantumExpectations expectations(const WaveFunction2P& psi);

  // Max |amp| on the grid boundary relative to max |amp| overall.
  static double boundary_amplitude_ratio(const WaveFunction2P& psi);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;

  // The experiment loop shares the propagator's scratch buffers to keep
  // the per-step observable pass allocation-free.
  friend QuantumRunRecord factorization_experiment(const ExternalPotential& external,
                                                   const PairPotential& pair,
                                                   const QuantumParams& params,
                                                   const WavepacketSpec& packet,
                                                   const BodyConfig& cfg);
};

// Full factorization experiment: propagate a product packet, track CM
// observables every step and purity every record_stride steps, and guard
// the grid boundary (GuardError naming the axis when the relative edge
// amplitude exceeds 1e-10).
struct QuantumRunRecord {
  // per step (index s = 0..n_steps): scalars for Ehrenfest differencing
  std::vector<double> times, x_mean, p_mean, x_var, p_var, energy, norm;
  std::vector<double> expectation_gap;  // <V(X)> - V(<X>), per step
  // per record_stride step
  std::vector<double> purity_times, purity;

  // max_t |d<X>/dt - <P>/M| and |d<P>/dt + <dV/dX>|, 4th-order central
  // differences on the interior
  double ehrenfest_residual_x = 0.0;
  double ehrenfest_residual_p = 0.0;
};

QuantumRunRecord factorization_experiment(const ExternalPotential& external,
                                          const PairPotential& pair,
                                          const QuantumParams& params,
                                          const WavepacketSpec& packet,
                                          const BodyConfig& cfg);

// <W(X)> - W(<X>) for the CM marginal of psi, W(X) = external potential of
// the pair treated as a point object at X (both atoms at X).
double expectation_gap(const WaveFunction2P& psi, const ExternalPotential& external,
                       const BodyConfig& cfg);

}  // namespace emergence
