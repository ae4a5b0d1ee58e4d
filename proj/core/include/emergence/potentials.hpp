#pragma once

#include <array>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "emergence/body.hpp"
#include "emergence/coords.hpp"

// One-body (external) and two-body (pair) potentials, their derivatives up
// to third order, and the second-order effective CM expansion built from
// them. All external potentials act per atom and separate over axes; the
// gravitational field points along the last axis ("vertical").

namespace emergence {

// ---- external potential variants -------------------------------------

struct Gravity {
  double g = 9.8;  // field strength; V = m g z per atom
};

struct Harmonic {
  double omega = 1.0;  // V = (1/2) m omega^2 |r|^2 per atom
};

// Isotropic-per-axis quartic trap: V = sum_axis (1/2) m omega^2 x^2 + lambda x^4.
struct Quartic {
  double omega = 1.0;
  double lambda = 0.0;  // >= 0
};

// Per-axis polynomial sum_n c_n x^n with optional validity domain per axis.
// axis_coeffs[axis][n] multiplies x^n. Empty coefficient lists mean zero
// potential on that axis.
struct Polynomial {
  std::vector<std::vector<double>> axis_coeffs;
  std::vector<std::optional<std::array<double, 2>>> domain;  // [lo, hi] per axis
};

// Gravity plus a smooth floor at z = 0: V = m g z + wall_coeff * z^4 for
// z < 0. The wall is C^3 at the contact point, so third derivatives used
// by the effective expansion stay continuous.
struct GravityFloor {
  double g = 9.8;
  double wall_coeff = 1.0;
};

using ExternalPotential =
    std::variant<Gravity, Harmonic, Quartic, Polynomial, GravityFloor>;

// ---- pair potential variants ------------------------------------------

// Nearest-neighbour chain bonds: u(r) = (1/2) stiffness (r - rest_length)^2
// between atoms (i, i+1) only.
struct HarmonicSpring {
  double stiffness = 1.0;
  double rest_length = 1.0;
};

// Truncated and shifted Lennard-Jones acting between all pairs within the
// cutoff: u(r) = 4 eps [(s/r)^12 - (s/r)^6] - u_c, u(r >= cutoff) = 0.
struct LennardJonesTruncated {
  double epsilon = 1.0;
  double sigma = 1.0;
  double cutoff = 2.5;
};

using PairPotential = std::variant<HarmonicSpring, LennardJonesTruncated>;

// ---- derivatives -------------------------------------------------------

// Totally symmetric third-derivative tensor, dim <= 3.
class ThirdDerivative {
 public:
  explicit ThirdDerivative(int dim) : dim_(dim) { v_.fill(0.0); }

  int dim() const { return dim_; }
  double& operator()(int a, int b, int c) { return v_[(a * dim_ + b) * dim_ + c]; }
  double operator()(int a, int b, int c) const {
    return v_[(a * dim_ + b) * dim_ + c];
  }

 private:
  int dim_;
  std::array<double, 27> v_;
};

// Value and derivatives of the one-atom external potential at a point.
struct DerivativeBundle {
  double value = 0.0;
  Eigen::VectorXd gradient;  // dim
  Eigen::MatrixXd hessian;   // dim x dim
  ThirdDerivative third{1};
};

// Throws ConfigError when point leaves a Polynomial domain.
DerivativeBundle eval_external(const ExternalPotential& pot,
                               const Eigen::VectorXd& point,
                               const BodyConfig& cfg);

// Sum of the one-atom potential over all atoms.
double external_energy(const ExternalPotential& pot, const Eigen::MatrixXd& positions,
                       const BodyConfig& cfg);

// Accumulates -grad V onto forces (same shape as positions).
void add_external_forces(const ExternalPotential& pot, const Eigen::MatrixXd& positions,
                         const BodyConfig& cfg, Eigen::MatrixXd& forces);

// Second-order expansion of the summed external potential about the CM:
//   N V(R) + (1/2) I_ab d2V/dRa dRb.
double effective_expansion(const ExternalPotential& pot, const Eigen::VectorXd& cm,
                           const InertiaTensor& inertia, const BodyConfig& cfg);

// Exact gradient of effective_expansion at fixed inertia:
//   F_c = -N dV/dRc - (1/2) I_ab d3V/dRc dRa dRb.
Eigen::VectorXd effective_cm_force(const ExternalPotential& pot,
                                   const Eigen::VectorXd& cm,
                                   const InertiaTensor& inertia,
                                   const BodyConfig& cfg);

// ---- pair forces ---------------------------------------------------------

struct PairForces {
  Eigen::MatrixXd forces;  // n_atoms x dim
  double energy = 0.0;
};

// Spring bonds couple consecutive chain neighbours; Lennard-Jones couples
// every pair within the cutoff (O(N^2) scan). Throws NumericalError when a
// pair distance collapses under a potential that cannot support it.
PairForces pair_forces(const PairPotential& pot, const Eigen::MatrixXd& positions,
                       const BodyConfig& cfg);

// Allocation-free variants for integrator loops: accumulate into `forces`
// (pre-sized, caller-zeroed) and add energies onto *energy when non-null.
void accumulate_pair_forces(const PairPotential& pot, const Eigen::MatrixXd& positions,
                            const BodyConfig& cfg, Eigen::MatrixXd& forces,
                            double* energy);
void accumulate_external_forces(const ExternalPotential& pot,
                                const Eigen::MatrixXd& positions, const BodyConfig& cfg,
                                Eigen::MatrixXd& forces, double* energy);

double pair_energy(const PairPotential& pot, const Eigen::MatrixXd& positions,
                   const BodyConfig& cfg);

// Scalar profile u(r) of the pair potential, used on quantum grids.
double pair_value_at_separation(const PairPotential& pot, double distance);

// Second derivative u''(r), used to estimate local stiffness when
// thermalizing. For springs this is the stiffness constant.
double pair_stiffness_at_separation(const PairPotential& pot, double distance);

}  // namespace emergence
