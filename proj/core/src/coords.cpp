#include "emergence/coords.hpp"

#include <algorithm>
#include <cmath>

#include "emergence/random.hpp"

namespace emergence {

TransformCoefficients::TransformCoefficients(int n_atoms) : n_(n_atoms) {
  if (n_atoms < 2) throw ConfigError("transform needs n_atoms >= 2");
}

Eigen::MatrixXd KMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size, size);
  for (int j = 0; j < size; ++j)
    for (int k = 0; k < size; ++k) m(j, k) = entry(j, k);
  return m;
}

Eigen::MatrixXd GramMatrix::dense() const {
  const int s = size();
  Eigen::MatrixXd m(s, s);
  for (int j = 0; j < s; ++j)
    for (int k = 0; k < s; ++k) m(j, k) = entry(j, k);
  return m;
}

CmDecomposition forward_transform(const PhaseState& state, const BodyConfig& cfg) {
  check_shapes(state, cfg);
  const int n = cfg.n_atoms;
  const int d = cfg.dim;

  CmDecomposition dec;
  dec.time = state.time;
  dec.cm_position = state.positions.colwise().mean();
  dec.cm_momentum = state.momenta.colwise().sum();
  dec.rel_positions.resize(n - 1, d);
  dec.rel_momenta.resize(n - 1, d);

  for (int j = 0; j < n - 1; ++j)
    dec.rel_positions.row(j) = state.positions.row(j) - state.positions.row(j + 1);

  // rel_momenta[k] = sum_{i<=k} p_i - (k+1)/N * P, the prefix-sum form of
  // sum_i a(k,i) p_i.
  Eigen::RowVectorXd prefix = Eigen::RowVectorXd::Zero(d);
  const Eigen::RowVectorXd total = dec.cm_momentum.transpose();
  for (int k = 0; k < n - 1; ++k) {
    prefix += state.momenta.row(k);
    dec.rel_momenta.row(k) = prefix - (static_cast<double>(k + 1) / n) * total;
  }
  return dec;
}

PhaseState inverse_transform(const CmDecomposition& dec, const BodyConfig& cfg) {
  const int n = cfg.n_atoms;
  const int d = cfg.dim;
  if (dec.rel_positions.rows() != n - 1 || dec.rel_momenta.rows() != n - 1 ||
      dec.rel_positions.cols() != d || dec.rel_momenta.cols() != d ||
      dec.cm_position.size() != d || dec.cm_momentum.size() != d)
    throw ConfigError("decomposition shape does not match body config");

  PhaseState state;
  state.time = dec.time;
  state.positions.resize(n, d);
  state.momenta.resize(n, d);

  // r_i = R + sum_{k>=i} rel_r[k] - sum_k (k+1)/N rel_r[k]; the second sum
  // is shared across atoms, the first telescopes from the tail.
  Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(d);
  for (int k = 0; k < n - 1; ++k)
    weighted += (static_cast<double>(k + 1) / n) * dec.rel_positions.row(k);

  Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(d);
  const Eigen::RowVectorXd base = dec.cm_position.transpose() - weighted;
  state.positions.row(n - 1) = base;
  for (int i = n - 2; i >= 0; --i) {
    suffix += dec.rel_positions.row(i);
    state.positions.row(i) = base + suffix;
  }

  // p_i = P/N + q_i - q_{i-1}, q_{-1} = q_{N-1} = 0.
  const Eigen::RowVectorXd share = dec.cm_momentum.transpose() / n;
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd p = share;
    if (i < n - 1) p += dec.rel_momenta.row(i);
    if (i > 0) p -= dec.rel_momenta.row(i - 1);
    state.momenta.row(i) = p;
  }
  return state;
}

TransformCoefficients inverse_coefficients(const BodyConfig& cfg) {
  cfg.validate();
  return TransformCoefficients(cfg.n_atoms);
}

KMatrix k_matrix(const BodyConfig& cfg) {
  cfg.validate();
  return KMatrix{cfg.n_atoms - 1};
}

GramMatrix gram_matrix(const BodyConfig& cfg) {
  cfg.validate();
  return GramMatrix{cfg.n_atoms};
}

InertiaTensor inertia_tensor(const PhaseState& state, const BodyConfig& cfg) {
  check_shapes(state, cfg);
  const Eigen::RowVectorXd cm = state.positions.colwise().mean();
  const Eigen::MatrixXd centered = state.positions.rowwise() - cm;
  return InertiaTensor{centered.transpose() * centered};
}

KineticSplit kinetic_decomposition(const PhaseState& state, const BodyConfig& cfg) {
  check_shapes(state, cfg);
  const double total = state.momenta.squaredNorm() / (2.0 * cfg.atom_mass);
  const Eigen::RowVectorXd p_tot = state.momenta.colwise().sum();
  KineticSplit split;
  split.cm = p_tot.squaredNorm() / (2.0 * cfg.total_mass());
  split.rel = total - split.cm;
  // Mathematically rel >= 0; a pure CM boost can leave rounding residue.
  if (split.rel < 0.0 && split.rel > -1e-12 * (total + 1.0)) split.rel = 0.0;
  return split;
}

namespace {

// Compensated (Kahan) accumulation; row sums of a(k, .) cancel to zero
// only up to rounding and the check budget is 1e-12.
double kahan_row_sum(const TransformCoefficients& a, int k) {
  double sum = 0.0, comp = 0.0;
  for (int i = 0; i < a.n_atoms(); ++i) {
    const double y = a(k, i) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace

CoordsIdentityReport check_coordinate_identities(const BodyConfig& cfg,
                                                 std::uint64_t seed) {
  cfg.validate();
  const int n = cfg.n_atoms;
  const TransformCoefficients a(n);

  CoordsIdentityReport rep;
  rep.n_atoms = n;

  for (int k = 0; k < n - 1; ++k)
    rep.max_coefficient_row_sum =
        std::max(rep.max_coefficient_row_sum, std::abs(kahan_row_sum(a, k)));

  // (G K)_jl contracts the tridiagonal K against closed-form G entries:
  // 2 G_jl - G_{j,l-1} - G_{j,l+1}.
  const GramMatrix g = gram_matrix(cfg);
  for (int j = 0; j < n - 1; ++j) {
    for (int l = 0; l < n - 1; ++l) {
      double v = 2.0 * g.entry(j, l);
      if (l > 0) v -= g.entry(j, l - 1);
      if (l < n - 2) v -= g.entry(j, l + 1);
      const double target = (j == l) ? 1.0 : 0.0;
      rep.max_gram_k_deviation =
          std::max(rep.max_gram_k_deviation, std::abs(v - target));
    }
  }

  // {rel_r_j, rel_p_k} = sum_i (d rel_r_j / d r_i)(d rel_p_k / d p_i)
  //                    = a(k, j) - a(k, j+1),
  // since rel_r_j depends on r_j, r_{j+1} only. Both terms share the same
  // (k+1)/N summand, so the subtraction is exact in floating point.
  for (int j = 0; j < n - 1; ++j) {
    for (int k = 0; k < n - 1; ++k) {
      const double bracket = a(k, j) - a(k, j + 1);
      const double target = (j == k) ? 1.0 : 0.0;
      rep.max_bracket_deviation =
          std::max(rep.max_bracket_deviation, std::abs(bracket - target));
    }
  }

  // Round trip and kinetic split on one random state.
  GaussianStream rng(seed);
  PhaseState state;
  state.positions.resize(n, cfg.dim);
  state.momenta.resize(n, cfg.dim);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < cfg.dim; ++c) {
      state.positions(i, c) = 10.0 * rng.gaussian();
      state.momenta(i, c) = 3.0 * rng.gaussian();
    }
  }
  const PhaseState back = inverse_transform(forward_transform(state, cfg), cfg);
  const double scale =
      std::max(state.positions.cwiseAbs().maxCoeff(), state.momenta.cwiseAbs().maxCoeff());
  const double err = std::max((back.positions - state.positions).cwiseAbs().maxCoeff(),
                              (back.momenta - state.momenta).cwiseAbs().maxCoeff());
  rep.max_roundtrip_error = err / scale;

  const KineticSplit split = kinetic_decomposition(state, cfg);
  const double total = state.momenta.squaredNorm() / (2.0 * cfg.atom_mass);
  rep.kinetic_split_error = std::abs(split.cm + split.rel - total) / total;
  return rep;
}

}  // namespace emergence
