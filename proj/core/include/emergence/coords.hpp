#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "emergence/body.hpp"

// Center-of-mass / relative-coordinate decomposition for a chain of N
// identical atoms.
//
// Conventions (0-based indices; j, k label relative coordinates in
// [0, N-2], i labels atoms in [0, N-1]):
//
//   R      = (1/N) sum_i r_i                     CM position
//   P      = sum_i p_i                           total momentum
//   rel_positions[j] = r_j - r_{j+1}             bond differences
//   rel_momenta[k]   = sum_i a(k, i) p_i         canonical conjugates
//
// with the coefficient matrix
//
//   a(k, i) = [k >= i] - (k + 1)/N.
//
// This a is exactly the set of coefficients expressing atomic positions in
// CM + relative variables,
//
//   r_i = R + sum_k a(k, i) rel_positions[k],
//
// and it makes the full map canonical: {rel_positions[j], rel_momenta[k]}
// = delta_jk, {R_alpha, P_beta} = delta_alphabeta, all cross brackets
// zero. Using the same coefficients for the momentum map (rather than the
// bond-difference stencil) is what canonicity forces; the choice is
// verified exhaustively by the bracket checks below.
//
// The inverse momentum map telescopes: p_i = P/N + q_i - q_{i-1} with
// q = rel_momenta and q_{-1} = q_{N-1} = 0.

namespace emergence {

// O(1)-per-entry accessor for a(k, i). k in [0, n-2], i in [0, n-1].
class TransformCoefficients {
 public:
  explicit TransformCoefficients(int n_atoms);

  int n_atoms() const { return n_; }

  double operator()(int k, int i) const {
    return (k >= i ? 1.0 : 0.0) - static_cast<double>(k + 1) / n_;
  }

 private:
  int n_;
};

// Stiffness-pattern matrix coupling relative coordinates: tridiagonal with
// 2 on the diagonal and -1 off it, size (N-1) x (N-1).
struct KMatrix {
  int size = 1;

  double entry(int j, int k) const {
    if (j == k) return 2.0;
    if (j == k + 1 || k == j + 1) return -1.0;
    return 0.0;
  }

  Eigen::MatrixXd dense() const;
};

// Gram matrix of the coefficient rows, G_jk = sum_i a(j, i) a(k, i).
// Closed form: G_jk = min(j, k) + 1 - (j + 1)(k + 1)/N, which is exactly
// the inverse of KMatrix. Entries are produced from the closed form; the
// equivalence with the literal sum is covered by tests.
struct GramMatrix {
  int n_atoms = 2;

  int size() const { return n_atoms - 1; }

  double entry(int j, int k) const {
    const double lo = static_cast<double>((j < k ? j : k) + 1);
    return lo - static_cast<double>(j + 1) * static_cast<double>(k + 1) / n_atoms;
  }

  Eigen::MatrixXd dense() const;
};

// State expressed in CM + relative variables.
struct CmDecomposition {
  Eigen::VectorXd cm_position;     // dim
  Eigen::VectorXd cm_momentum;     // dim
  Eigen::MatrixXd rel_positions;   // (N-1) x dim
  Eigen::MatrixXd rel_momenta;     // (N-1) x dim
  double time = 0.0;
};

struct KineticSplit {
  double cm = 0.0;   // |P|^2 / (2 N m)
  double rel = 0.0;  // total kinetic minus cm, always >= 0
};

// Second-moment tensor of positions about the CM:
// I_ab = sum_i (r_i - R)_a (r_i - R)_b.
struct InertiaTensor {
  Eigen::MatrixXd second_moment;  // dim x dim, symmetric PSD

  double trace() const { return second_moment.trace(); }
};

CmDecomposition forward_transform(const PhaseState& state, const BodyConfig& cfg);
PhaseState inverse_transform(const CmDecomposition& dec, const BodyConfig& cfg);

TransformCoefficients inverse_coefficients(const BodyConfig& cfg);
KMatrix k_matrix(const BodyConfig& cfg);
GramMatrix gram_matrix(const BodyConfig& cfg);

InertiaTensor inertia_tensor(const PhaseState& state, const BodyConfig& cfg);
KineticSplit kinetic_decomposition(const PhaseState& state, const BodyConfig& cfg);

// Exhaustive identity checks used by the check-coords command and the
// acceptance gate. All quantities are worst-case absolute deviations.
struct CoordsIdentityReport {
  int n_atoms = 0;
  double max_coefficient_row_sum = 0.0;  // max_k |sum_i a(k, i)|, compensated sum
  double max_gram_k_deviation = 0.0;     // max |(G K)_jl - delta_jl|
  double max_bracket_deviation = 0.0;    // max |{rel_r_j, rel_p_k} - delta_jk|
  double max_roundtrip_error = 0.0;      // relative, random state round trip
  double kinetic_split_error = 0.0;      // |cm + rel - total| / total, random state
};

CoordsIdentityReport check_coordinate_identities(const BodyConfig& cfg,
                                                 std::uint64_t seed);

}  // namespace emergence
