#include <benchmark/benchmark.h>

#include <complex>

#include "emergence/coords.hpp"
#include "emergence/mdsim.hpp"
#include "emergence/potentials.hpp"
#include "emergence/qsim.hpp"
#include "emergence/random.hpp"

namespace {

using namespace emergence;

BodyConfig chain(int n, int dim) {
  BodyConfig cfg;
  cfg.n_atoms = n;
  cfg.dim = dim;
  return cfg;
}

PhaseState noisy_lattice(const BodyConfig& cfg, std::uint64_t seed) {
  GaussianStream rng(seed);
  PhaseState s;
  s.positions = Eigen::MatrixXd::Zero(cfg.n_atoms, cfg.dim);
  s.momenta = Eigen::MatrixXd::Zero(cfg.n_atoms, cfg.dim);
  for (int i = 0; i < cfg.n_atoms; ++i) {
    s.positions(i, 0) = i * cfg.lattice_spacing;
    for (int c = 0; c < cfg.dim; ++c) {
      s.positions(i, c) += 0.01 * rng.gaussian();
      s.momenta(i, c) = 0.05 * rng.gaussian();
    }
  }
  return s;
}

void bm_forward_transform(benchmark::State& state) {
  const BodyConfig cfg = chain(static_cast<int>(state.range(0)), 3);
  const PhaseState s = noisy_lattice(cfg, 7);
  for (auto _ : state) {
    CmDecomposition dec = forward_transform(s, cfg);
    benchmark::DoNotOptimize(dec.rel_momenta.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_forward_transform)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void bm_spring_forces(benchmark::State& state) {
  const BodyConfig cfg = chain(static_cast<int>(state.range(0)), 3);
  const PhaseState s = noisy_lattice(cfg, 7);
  HarmonicSpring spring;
  spring.stiffness = 5.0;
  spring.rest_length = cfg.lattice_spacing;
  const PairPotential pair = spring;
  Eigen::MatrixXd forces = Eigen::MatrixXd::Zero(cfg.n_atoms, cfg.dim);
  double energy = 0.0;
  for (auto _ : state) {
    forces.setZero();
    energy = 0.0;
    accumulate_pair_forces(pair, s.positions, cfg, forces, &energy);
    benchmark::DoNotOptimize(energy);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_spring_forces)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void bm_md_step(benchmark::State& state) {
  const BodyConfig cfg = chain(static_cast<int>(state.range(0)), 3);
  HarmonicSpring spring;
  spring.stiffness = 5.0;
  spring.rest_length = cfg.lattice_spacing;
  const PairPotential pair = spring;
  Harmonic trap;
  trap.omega = 0.05;
  const ExternalPotential external = trap;
  PhaseState s = noisy_lattice(cfg, 7);
  for (auto _ : state) {
    advance(s, cfg, pair, external, 1e-3, 1);
    benchmark::DoNotOptimize(s.momenta.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_md_step)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void bm_split_operator_step(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  QuantumParams params;
  params.nx = n;
  params.nxi = n;
  params.extent_x = 24.0;
  params.extent_xi = 24.0;
  params.dt = 1e-3;
  params.n_steps = 1;
  BodyConfig cfg = chain(2, 1);
  Harmonic trap;
  trap.omega = 1.0;
  HarmonicSpring spring;
  spring.stiffness = 1.0;
  spring.rest_length = 0.0;
  WavepacketSpec packet;
  WaveFunction2P psi = make_packet(params, packet);
  const HamiltonianTerms terms =
      build_hamiltonian_terms(trap, spring, params, cfg);
  SplitOperatorPropagator prop(params, terms);
  for (auto _ : state) {
    prop.step(psi);
    benchmark::DoNotOptimize(psi.amp.data());
  }
}
BENCHMARK(bm_split_operator_step)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
