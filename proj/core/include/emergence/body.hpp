#pragma once

#include <Eigen/Dense>

#include "emergence/errors.hpp"

namespace emergence {

// Static description of the simulated body: n_atoms identical atoms of
// mass atom_mass, arranged as a chain with equilibrium spacing
// lattice_spacing along the first axis, living in dim spatial dimensions.
struct BodyConfig {
  int n_atoms = 2;
  double atom_mass = 1.0;
  int dim = 1;
  double lattice_spacing = 1.0;

  // Throws ConfigError on violation: n_atoms >= 2, atom_mass > 0,
  // dim in {1, 3}, lattice_spacing > 0.
  void validate() const;

  double total_mass() const { return n_atoms * atom_mass; }
};

// Instantaneous state in atomic coordinates. Row i holds atom i.
struct PhaseState {
  Eigen::MatrixXd positions;  // n_atoms x dim
  Eigen::MatrixXd momenta;    // n_atoms x dim
  double time = 0.0;
};

// Throws ConfigError if the state's shapes disagree with cfg.
void check_shapes(const PhaseState& state, const BodyConfig& cfg);

}  // namespace emergence
