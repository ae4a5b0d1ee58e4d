#include "emergence/potentials.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace emergence {
namespace {

struct AxisDerivs {
  double v = 0.0, d1 = 0.0, d2 = 0.0, d3 = 0.0;
};

// The gravitational field acts along the last axis; in 1D that is the only
// axis.
AxisDerivs axis_eval(const Gravity& p, int axis, int dim, double x, double m) {
  if (axis != dim - 1) return {};
  return {m * p.g * x, m * p.g, 0.0, 0.0};
}

AxisDerivs axis_eval(const Harmonic& p, int, int, double x, double m) {
  const double k = m * p.omega * p.omega;
  return {0.5 * k * x * x, k * x, k, 0.0};
}

AxisDerivs axis_eval(const Quartic& p, int, int, double x, double m) {
  const double k = m * p.omega * p.omega;
  const double l = p.lambda;
  const double x2 = x * x;
  return {0.5 * k * x2 + l * x2 * x2, k * x + 4.0 * l * x2 * x, k + 12.0 * l * x2,
          24.0 * l * x};
}

// Polynomial coefficients are taken literally (no implicit mass factor).
AxisDerivs axis_eval(const Polynomial& p, int axis, int, double x, double) {
  if (axis >= static_cast<int>(p.axis_coeffs.size())) return {};
  if (axis < static_cast<int>(p.domain.size()) && p.domain[axis]) {
    const auto& dom = *p.domain[axis];
    if (x < dom[0] || x > dom[1])
      throw ConfigError("polynomial potential evaluated outside its domain on axis " +
                        std::to_string(axis) + " (x = " + std::to_string(x) + ")");
  }
  const auto& c = p.axis_coeffs[axis];
  if (c.empty()) return {};
  // Simultaneous Horner: after the loop d1 = V', d2 = V''/2, d3 = V'''/6.
  double v = c.back(), d1 = 0.0, d2 = 0.0, d3 = 0.0;
  for (int n = static_cast<int>(c.size()) - 2; n >= 0; --n) {
    d3 = d3 * x + d2;
    d2 = d2 * x + d1;
    d1 = d1 * x + v;
    v = v * x + c[n];
  }
  return {v, d1, 2.0 * d2, 6.0 * d3};
}

AxisDerivs axis_eval(const GravityFloor& p, int axis, int dim, double x, double m) {
  if (axis != dim - 1) return {};
  AxisDerivs d{m * p.g * x, m * p.g, 0.0, 0.0};
  if (x < 0.0) {
    const double a = p.wall_coeff;
    const double x2 = x * x;
    d.v += a * x2 * x2;
    d.d1 += 4.0 * a * x2 * x;
    d.d2 += 12.0 * a * x2;
    d.d3 += 24.0 * a * x;
  }
  return d;
}

template <class P>
double energy_sum(const P& p, const Eigen::MatrixXd& positions, const BodyConfig& cfg) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < positions.rows(); ++i)
    for (int axis = 0; axis < cfg.dim; ++axis)
      e += axis_eval(p, axis, cfg.dim, positions(i, axis), cfg.atom_mass).v;
  return e;
}

template <class P>
void force_sum(const P& p, const Eigen::MatrixXd& positions, const BodyConfig& cfg,
               Eigen::MatrixXd& forces, double* energy) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    for (int axis = 0; axis < cfg.dim; ++axis) {
      const AxisDerivs d = axis_eval(p, axis, cfg.dim, positions(i, axis), cfg.atom_mass);
      forces(i, axis) -= d.d1;
      e += d.v;
    }
  }
  if (energy) *energy += e;
}

}  // namespace

DerivativeBundle eval_external(const ExternalPotential& pot, const Eigen::VectorXd& point,
                               const BodyConfig& cfg) {
  if (point.size() != cfg.dim)
    throw ConfigError("potential evaluation point has wrong dimension");
  DerivativeBundle b;
  b.gradient = Eigen::VectorXd::Zero(cfg.dim);
  b.hessian = Eigen::MatrixXd::Zero(cfg.dim, cfg.dim);
  b.third = ThirdDerivative(cfg.dim);
  std::visit(
      [&](const auto& p) {
        for (int axis = 0; axis < cfg.dim; ++axis) {
          const AxisDerivs d = axis_eval(p, axis, cfg.dim, point[axis], cfg.atom_mass);
          b.value += d.v;
          b.gradient[axis] = d.d1;
          b.hessian(axis, axis) = d.d2;
          b.third(axis, axis, axis) = d.d3;
        }
      },
      pot);
  return b;
}

double external_energy(const ExternalPotential& pot, const Eigen::MatrixXd& positions,
                       const BodyConfig& cfg) {
  return std::visit([&](const auto& p) { return energy_sum(p, positions, cfg); }, pot);
}

void add_external_forces(const ExternalPotential& pot, const Eigen::MatrixXd& positions,
                         const BodyConfig& cfg, Eigen::MatrixXd& forces) {
  std::visit([&](const auto& p) { force_sum(p, positions, cfg, forces, nullptr); }, pot);
}

void accumulate_external_forces(const ExternalPotential& pot,
                                const Eigen::MatrixXd& positions, const BodyConfig& cfg,
                                Eigen::MatrixXd& forces, double* energy) {
  std::visit([&](const auto& p) { force_sum(p, positions, cfg, forces, energy); }, pot);
}

double effective_expansion(const ExternalPotential& pot, const Eigen::VectorXd& cm,
                           const InertiaTensor& inertia, const BodyConfig& cfg) {
  const DerivativeBundle b = eval_external(pot, cm, cfg);
  double quad = 0.0;
  for (int a = 0; a < cfg.dim; ++a)
    for (int c = 0; c < cfg.dim; ++c) quad += inertia.second_moment(a, c) * b.hessian(a, c);
  return cfg.n_atoms * b.value + 0.5 * quad;
}

Eigen::VectorXd effective_cm_force(const ExternalPotential& pot, const Eigen::VectorXd& cm,
                                   const InertiaTensor& inertia, const BodyConfig& cfg) {
  const DerivativeBundle b = eval_external(pot, cm, cfg);
  Eigen::VectorXd f = -static_cast<double>(cfg.n_atoms) * b.gradient;
  for (int c = 0; c < cfg.dim; ++c) {
    double corr = 0.0;
    for (int a = 0; a < cfg.dim; ++a)
      for (int d = 0; d < cfg.dim; ++d)
        corr += inertia.second_moment(a, d) * b.third(c, a, d);
    f[c] -= 0.5 * corr;
  }
  return f;
}

namespace {

void add_spring_forces(const HarmonicSpring& s, const Eigen::MatrixXd& positions,
                       Eigen::MatrixXd& forces, double* energy) {
  if (s.stiffness == 0.0) return;
  const Eigen::Index n = positions.rows();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Eigen::RowVectorXd d = positions.row(i) - positions.row(i + 1);
    const double len = d.norm();
    double factor;  // force on atom i is -factor * d
    if (s.rest_length == 0.0) {
      factor = s.stiffness;
    } else {
      if (len < 1e-12 * s.rest_length)
        throw NumericalError("coincident atoms in chain bond " + std::to_string(i) +
                             "; bond direction undefined");
      factor = s.stiffness * (len - s.rest_length) / len;
    }
    if (forces.size() > 0) {
      forces.row(i) -= factor * d;
      forces.row(i + 1) += factor * d;
    }
    if (energy) {
      const double stretch = len - s.rest_length;
      *energy += 0.5 * s.stiffness * stretch * stretch;
    }
  }
}

void add_lj_forces(const LennardJonesTruncated& lj, const Eigen::MatrixXd& positions,
                   Eigen::MatrixXd& forces, double* energy) {
  const Eigen::Index n = positions.rows();
  const double rc2 = lj.cutoff * lj.cutoff;
  const double s2 = lj.sigma * lj.sigma;
  // Energy shift so u(cutoff) = 0.
  const double sc6 = std::pow(s2 / rc2, 3);
  const double shift = 4.0 * lj.epsilon * (sc6 * sc6 - sc6);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Eigen::RowVectorXd d = positions.row(i) - positions.row(j);
      const double r2 = d.squaredNorm();
      if (r2 >= rc2) continue;
      if (r2 < 1e-18 * s2)
        throw NumericalError("coincident atoms " + std::to_string(i) + "," +
                             std::to_string(j) + " inside Lennard-Jones core");
      const double inv6 = std::pow(s2 / r2, 3);
      if (forces.size() > 0) {
        const double fmag = 24.0 * lj.epsilon * (2.0 * inv6 * inv6 - inv6) / r2;
        forces.row(i) += fmag * d;
        forces.row(j) -= fmag * d;
      }
      if (energy) *energy += 4.0 * lj.epsilon * (inv6 * inv6 - inv6) - shift;
    }
  }
}

}  // namespace

PairForces pair_forces(const PairPotential& pot, const Eigen::MatrixXd& positions,
                       const BodyConfig& cfg) {
  PairForces out;
  out.forces = Eigen::MatrixXd::Zero(positions.rows(), cfg.dim);
  accumulate_pair_forces(pot, positions, cfg, out.forces, &out.energy);
  return out;
}

void accumulate_pair_forces(const PairPotential& pot, const Eigen::MatrixXd& positions,
                            const BodyConfig&, Eigen::MatrixXd& forces, double* energy) {
  std::visit(
      [&](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HarmonicSpring>)
          add_spring_forces(p, positions, forces, energy);
        else
          add_lj_forces(p, positions, forces, energy);
      },
      pot);
}

double pair_energy(const PairPotential& pot, const Eigen::MatrixXd& positions,
                   const BodyConfig&) {
  double e = 0.0;
  Eigen::MatrixXd dummy;  // size 0: energy-only path
  std::visit(
      [&](const auto& p) {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HarmonicSpring>)
          add_spring_forces(p, positions, dummy, &e);
        else
          add_lj_forces(p, positions, dummy, &e);
      },
      pot);
  return e;
}

double pair_value_at_separation(const PairPotential& pot, double distance) {
  return std::visit(
      [&](const auto& p) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HarmonicSpring>) {
          const double stretch = distance - p.rest_length;
          return 0.5 * p.stiffness * stretch * stretch;
        } else {
          if (distance >= p.cutoff) return 0.0;
          if (distance <= 0.0) return std::numeric_limits<double>::infinity();
          const double inv6 = std::pow(p.sigma * p.sigma / (distance * distance), 3);
          const double invc6 = std::pow(p.sigma / p.cutoff, 6);
          return 4.0 * p.epsilon * (inv6 * inv6 - inv6) -
                 4.0 * p.epsilon * (invc6 * invc6 - invc6);
        }
      },
      pot);
}

double pair_stiffness_at_separation(const PairPotential& pot, double distance) {
  return std::visit(
      [&](const auto& p) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, HarmonicSpring>) {
          return p.stiffness;
        } else {
          if (distance >= p.cutoff || distance <= 0.0) return 0.0;
          const double s6 = std::pow(p.sigma, 6);
          const double r = distance;
          return 4.0 * p.epsilon *
                 (156.0 * s6 * s6 / std::pow(r, 14) - 42.0 * s6 / std::pow(r, 8));
        }
      },
      pot);
}

}  // namespace emergence
