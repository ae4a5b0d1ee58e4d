#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "emergence/body.hpp"
#include "emergence/coords.hpp"
#include "emergence/potentials.hpp"

// Velocity-Verlet molecular dynamics for the chain, plus the observables
// that expose the CM/relative energy split and the second-order
// dissipation balance.

namespace emergence {

struct IntegratorParams {
  double dt = 1e-3;
  long n_steps = 1000;
  long record_stride = 1;  // record every this many steps (step 0 included)

  void validate() const;
};

enum class ScenarioKind { HarmonicTrap, QuarticTrap, GravityFloorDrop };

// Initial-condition recipe: thermalized relative motion around a chain
// centred at cm_offset, with the CM boosted to velocity cm_velocity.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::HarmonicTrap;
  Eigen::VectorXd cm_offset;    // dim
  Eigen::VectorXd cm_velocity;  // dim
  double temperature = 0.0;     // >= 0
};

// Throws ConfigError when the scenario kind and external potential do not
// belong together (for example a drop scenario without a floor or field).
void check_scenario_compatible(const ScenarioSpec& scenario,
                               const ExternalPotential& external);

// Time series of recorded observables. Eigen matrices hold one record per
// row; inertia keeps the full dim x dim tensor per record.
struct TrajectoryRecord {
  int dim = 1;
  std::vector<double> times;
  Eigen::MatrixXd cm_positions;   // n_records x dim
  Eigen::MatrixXd cm_momenta;     // n_records x dim
  std::vector<double> e_cm;       // |P|^2/(2Nm) + N V(R)
  std::vector<double> e_total;    // kinetic + pair + external
  std::vector<double> rel_kinetic;
  std::vector<Eigen::MatrixXd> inertia;

  long n_records() const { return static_cast<long>(times.size()); }
};

// One velocity-Verlet step. Pure: returns the advanced state. Throws
// NumericalError naming the step when forces or coordinates go non-finite.
PhaseState step(const PhaseState& state, const BodyConfig& cfg,
                const PairPotential& pair, const ExternalPotential& external,
                double dt);

// Advances the state in place by n_steps (one force evaluation per step).
// step_offset only labels error messages when an ensemble member blows up
// mid-trajectory.
void advance(PhaseState& state, const BodyConfig& cfg, const PairPotential& pair,
             const ExternalPotential& external, double dt, long n_steps,
             long step_offset = 0);

TrajectoryRecord run(const PhaseState& initial, const BodyConfig& cfg,
                     const PairPotential& pair, const ExternalPotential& external,
                     const IntegratorParams& params);

// CM energy as seen by the effective one-body description:
// |P|^2/(2 N m) + N V(R).
double cm_energy(const PhaseState& state, const BodyConfig& cfg,
                 const ExternalPotential& external);

double total_energy(const PhaseState& state, const BodyConfig& cfg,
                    const PairPotential& pair, const ExternalPotential& external);

// Finite-difference check of the CM energy balance along a recorded
// trajectory: lhs = d(e_cm)/dt, rhs = -(1/2) I_ab d3V(R) . Rdot.
// Interior records only (central differences).
struct DissipationDiagnostic {
  std::vector<double> times;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> residual;  // lhs - rhs
  double rms_lhs = 0.0;
  double rms_residual = 0.0;
  double ratio = 0.0;  // rms_residual / rms_lhs
};

// Throws ConfigError when fewer than 3 records are available.
DissipationDiagnostic dissipation_diagnostic(const TrajectoryRecord& traj,
                                             const BodyConfig& cfg,
                                             const ExternalPotential& external);

// Builds a chain at the lattice sites around `center`, then draws thermal
// relative displacements and momenta at temperature T:
//   displacement variance per axis = T / k_eff  (k_eff from bond stiffness
//   plus the local external curvature; axes with no restoring force get no
//   positional noise),
//   momentum variance = m T per component.
// The total momentum is then projected out and the CM recentred, so the
// returned state has P = 0 and R = center up to rounding.
PhaseState thermalize_relative(const BodyConfig& cfg, const PairPotential& pair,
                               const ExternalPotential& external, double temperature,
                               const Eigen::VectorXd& center, std::uint64_t seed);

// thermalize_relative + CM offset/boost from the scenario.
PhaseState prepare_scenario(const BodyConfig& cfg, const PairPotential& pair,
                            const ExternalPotential& external,
                            const ScenarioSpec& scenario, std::uint64_t seed);

}  // namespace emergence
