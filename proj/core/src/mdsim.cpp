#include "emergence/mdsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "emergence/random.hpp"

namespace emergence {

void IntegratorParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("integrator.dt must be > 0");
  if (n_steps < 1) throw ConfigError("integrator.n_steps must be >= 1");
  if (record_stride < 1) throw ConfigError("integrator.record_stride must be >= 1");
}

void check_scenario_compatible(const ScenarioSpec& scenario,
                               const ExternalPotential& external) {
  switch (scenario.kind) {
    case ScenarioKind::HarmonicTrap:
      if (!std::holds_alternative<Harmonic>(external))
        throw ConfigError("harmonic_trap scenario requires a harmonic external potential");
      break;
    case ScenarioKind::QuarticTrap:
      if (!std::holds_alternative<Quartic>(external) &&
          !std::holds_alternative<Polynomial>(external))
        throw ConfigError(
            "quartic_trap scenario requires a quartic or polynomial external potential");
      break;
    case ScenarioKind::GravityFloorDrop:
      if (!std::holds_alternative<Gravity>(external) &&
          !std::holds_alternative<GravityFloor>(external))
        throw ConfigError(
            "gravity_floor_drop scenario requires a gravity or gravity_floor external "
            "potential");
      break;
  }
  if (scenario.temperature < 0.0) throw ConfigError("scenario.temperature must be >= 0");
}

namespace {

// Shared force workspace so the integrator never allocates inside the
// step loop.
struct ForceEval {
  Eigen::MatrixXd forces;
  double pair_e = 0.0;
  double ext_e = 0.0;

  void refresh(const Eigen::MatrixXd& positions, const BodyConfig& cfg,
               const PairPotential& pair, const ExternalPotential& external,
               long step_index) {
    if (forces.rows() != positions.rows() || forces.cols() != positions.cols())
      forces.resize(positions.rows(), positions.cols());
    forces.setZero();
    pair_e = 0.0;
    ext_e = 0.0;
    accumulate_pair_forces(pair, positions, cfg, forces, &pair_e);
    accumulate_external_forces(external, positions, cfg, forces, &ext_e);
    if (!forces.allFinite())
      throw NumericalError("non-finite force at step " + std::to_string(step_index));
  }
};

double cm_potential(const Eigen::RowVectorXd& cm, const BodyConfig& cfg,
                    const ExternalPotential& external) {
  return eval_external(external, cm.transpose(), cfg).value;
}

}  // namespace

PhaseState step(const PhaseState& state, const BodyConfig& cfg, const PairPotential& pair,
                const ExternalPotential& external, double dt) {
  PhaseState s = state;
  advance(s, cfg, pair, external, dt, 1);
  return s;
}

void advance(PhaseState& state, const BodyConfig& cfg, const PairPotential& pair,
             const ExternalPotential& external, double dt, long n_steps,
             long step_offset) {
  check_shapes(state, cfg);
  if (n_steps <= 0) return;
  ForceEval fe;
  fe.refresh(state.positions, cfg, pair, external, step_offset);
  const double half_dt = 0.5 * dt;
  const double drift = dt / cfg.atom_mass;
  for (long k = 0; k < n_steps; ++k) {
    state.momenta.noalias() += half_dt * fe.forces;
    state.positions.noalias() += drift * state.momenta;
    fe.refresh(state.positions, cfg, pair, external, step_offset + k + 1);
    state.momenta.noalias() += half_dt * fe.forces;
    state.time += dt;
  }
}

TrajectoryRecord run(const PhaseState& initial, const BodyConfig& cfg,
                     const PairPotential& pair, const ExternalPotential& external,
                     const IntegratorParams& params) {
  check_shapes(initial, cfg);
  params.validate();

  const long n_rec = params.n_steps / params.record_stride + 1;
  TrajectoryRecord traj;
  traj.dim = cfg.dim;
  traj.times.reserve(n_rec);
  traj.cm_positions.resize(n_rec, cfg.dim);
  traj.cm_momenta.resize(n_rec, cfg.dim);
  traj.e_cm.reserve(n_rec);
  traj.e_total.reserve(n_rec);
  traj.rel_kinetic.reserve(n_rec);
  traj.inertia.reserve(n_rec);

  PhaseState s = initial;
  ForceEval fe;
  fe.refresh(s.positions, cfg, pair, external, 0);

  const double inv_mass = 1.0 / cfg.atom_mass;
  const double half_dt = 0.5 * params.dt;

  auto record = [&](long rec_idx) {
    const Eigen::RowVectorXd cm = s.positions.colwise().mean();
    const Eigen::RowVectorXd p_tot = s.momenta.colwise().sum();
    traj.times.push_back(s.time);
    traj.cm_positions.row(rec_idx) = cm;
    traj.cm_momenta.row(rec_idx) = p_tot;
    const double kin_total = s.momenta.squaredNorm() * 0.5 * inv_mass;
    const double e_cm = p_tot.squaredNorm() / (2.0 * cfg.total_mass()) +
                        cfg.n_atoms * cm_potential(cm, cfg, external);
    traj.e_cm.push_back(e_cm);
    traj.e_total.push_back(kin_total + fe.pair_e + fe.ext_e);
    const KineticSplit split = kinetic_decomposition(s, cfg);
    traj.rel_kinetic.push_back(split.rel);
    traj.inertia.push_back(inertia_tensor(s, cfg).second_moment);
  };

  long rec_idx = 0;
  record(rec_idx++);
  for (long k = 1; k <= params.n_steps; ++k) {
    s.momenta.noalias() += half_dt * fe.forces;
    s.positions.noalias() += (params.dt * inv_mass) * s.momenta;
    fe.refresh(s.positions, cfg, pair, external, k);
    s.momenta.noalias() += half_dt * fe.forces;
    s.time = initial.time + k * params.dt;
    if (k % params.record_stride == 0) record(rec_idx++);
  }
  traj.cm_positions.conservativeResize(rec_idx, cfg.dim);
  traj.cm_momenta.conservativeResize(rec_idx, cfg.dim);
  return traj;
}

double cm_energy(const PhaseState& state, const BodyConfig& cfg,
                 const ExternalPotential& external) {
  check_shapes(state, cfg);
  const Eigen::RowVectorXd cm = state.positions.colwise().mean();
  const Eigen::RowVectorXd p_tot = state.momenta.colwise().sum();
  return p_tot.squaredNorm() / (2.0 * cfg.total_mass()) +
         cfg.n_atoms * cm_potential(cm, cfg, external);
}

double total_energy(const PhaseState& state, const BodyConfig& cfg,
                    const PairPotential& pair, const ExternalPotential& external) {
  check_shapes(state, cfg);
  return state.momenta.squaredNorm() / (2.0 * cfg.atom_mass) +
         pair_energy(pair, state.positions, cfg) +
         external_energy(external, state.positions, cfg);
}

DissipationDiagnostic dissipation_diagnostic(const TrajectoryRecord& traj,
                                             const BodyConfig& cfg,
                                             const ExternalPotential& external) {
  const long n = traj.n_records();
  if (n < 3) throw ConfigError("dissipation diagnostic needs at least 3 records");

  const double dt0 = traj.times[1] - traj.times[0];
  for (long k = 1; k + 1 < n; ++k) {
    if (std::abs((traj.times[k + 1] - traj.times[k]) - dt0) > 1e-9 * std::max(1.0, dt0))
      throw ConfigError("dissipation diagnostic needs uniformly spaced records");
  }

  DissipationDiagnostic diag;
  diag.times.reserve(n - 2);
  diag.lhs.reserve(n - 2);
  diag.rhs.reserve(n - 2);
  diag.residual.reserve(n - 2);

  double sum_lhs2 = 0.0, sum_res2 = 0.0;
  for (long k = 1; k + 1 < n; ++k) {
    const double lhs = (traj.e_cm[k + 1] - traj.e_cm[k - 1]) / (2.0 * dt0);
    const Eigen::VectorXd rdot =
        (traj.cm_positions.row(k + 1) - traj.cm_positions.row(k - 1)).transpose() /
        (2.0 * dt0);
    const DerivativeBundle b =
        eval_external(external, traj.cm_positions.row(k).transpose(), cfg);
    double rhs = 0.0;
    for (int c = 0; c < cfg.dim; ++c) {
      double contract = 0.0;
      for (int a = 0; a < cfg.dim; ++a)
        for (int d = 0; d < cfg.dim; ++d)
          contract += traj.inertia[k](a, d) * b.third(c, a, d);
      rhs += contract * rdot[c];
    }
    rhs *= -0.5;
    diag.times.push_back(traj.times[k]);
    diag.lhs.push_back(lhs);
    diag.rhs.push_back(rhs);
    diag.residual.push_back(lhs - rhs);
    sum_lhs2 += lhs * lhs;
    sum_res2 += (lhs - rhs) * (lhs - rhs);
  }
  const double m = static_cast<double>(diag.times.size());
  diag.rms_lhs = std::sqrt(sum_lhs2 / m);
  diag.rms_residual = std::sqrt(sum_res2 / m);
  diag.ratio = diag.rms_lhs > 0.0 ? diag.rms_residual / diag.rms_lhs
                                  : (diag.rms_residual > 0.0
                                         ? std::numeric_limits<double>::infinity()
                                         : 0.0);
  return diag;
}

PhaseState thermalize_relative(const BodyConfig& cfg, const PairPotential& pair,
                               const ExternalPotential& external, double temperature,
                               const Eigen::VectorXd& center, std::uint64_t seed) {
  cfg.validate();
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (center.size() != cfg.dim) throw ConfigError("center has wrong dimension");

  const int n = cfg.n_atoms;
  PhaseState s;
  s.positions.resize(n, cfg.dim);
  s.momenta = Eigen::MatrixXd::Zero(n, cfg.dim);
  s.time = 0.0;

  // Lattice sites: chain along axis 0, centred on `center`.
  for (int i = 0; i < n; ++i) {
    s.positions.row(i) = center.transpose();
    s.positions(i, 0) += (i - 0.5 * (n - 1)) * cfg.lattice_spacing;
  }

  if (temperature > 0.0) {
    GaussianStream rng(seed);
    const double bond_k =
        std::max(0.0, pair_stiffness_at_separation(pair, cfg.lattice_spacing));
    // Positional noise per axis from the local stiffness: bond stretching
    // acts along the chain axis, the external curvature acts per axis.
    // Axes left unconfined get no positional noise (free directions have
    // no length scale to draw from).
    for (int i = 0; i < n; ++i) {
      const DerivativeBundle b =
          eval_external(external, s.positions.row(i).transpose(), cfg);
      const double bonds = (i == 0 || i == n - 1) ? 1.0 : 2.0;
      for (int axis = 0; axis < cfg.dim; ++axis) {
        double k_eff = std::max(0.0, b.hessian(axis, axis));
        if (axis == 0) k_eff += bonds * bond_k;
        if (k_eff > 1e-9)
          s.positions(i, axis) += std::sqrt(temperature / k_eff) * rng.gaussian();
      }
    }
    const double sigma_p = std::sqrt(cfg.atom_mass * temperature);
    for (int i = 0; i < n; ++i)
      for (int axis = 0; axis < cfg.dim; ++axis)
        s.momenta(i, axis) = sigma_p * rng.gaussian();
  }

  // Exact projections: zero total momentum, CM back at center.
  const Eigen::RowVectorXd p_mean = s.momenta.colwise().mean();
  s.momenta.rowwise() -= p_mean;
  const Eigen::RowVectorXd shift =
      center.transpose() - s.positions.colwise().mean();
  s.positions.rowwise() += shift;
  return s;
}

PhaseState prepare_scenario(const BodyConfig& cfg, const PairPotential& pair,
                            const ExternalPotential& external,
                            const ScenarioSpec& scenario, std::uint64_t seed) {
  check_scenario_compatible(scenario, external);
  if (scenario.cm_offset.size() != cfg.dim || scenario.cm_velocity.size() != cfg.dim)
    throw ConfigError("scenario offset/velocity must have the body dimension");
  PhaseState s = thermalize_relative(cfg, pair, external, scenario.temperature,
                                     scenario.cm_offset, seed);
  s.momenta.rowwise() += (cfg.atom_mass * scenario.cm_velocity).transpose();
  return s;
}

}  // namespace emergence
