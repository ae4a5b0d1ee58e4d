#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emergence/mdsim.hpp"

// Ensembles of independent trajectories, fluctuation statistics with
// jackknife errors, coarse-grained block variables, and the system-size
// scaling study.

namespace emergence {

struct EnsembleSpec {
  int n_members = 2;          // >= 2
  std::uint64_t base_seed = 1;  // member j runs with seed base_seed + j
  std::vector<double> sample_times;  // strictly increasing, > 0
  int n_blocks = 8;           // contiguous equal blocks for coarse variables

  void validate() const;
};

// Contiguous partition of the chain into blocks of (as near as possible)
// equal atom counts. Blocks are [begin, end) atom index ranges.
struct BlockPartition {
  std::vector<std::pair<int, int>> ranges;
  std::vector<double> masses;

  static BlockPartition equal_split(const BodyConfig& cfg, int n_blocks);
  int n_blocks() const { return static_cast<int>(ranges.size()); }
};

// Per-block CM variables of one state.
struct BlockCmVars {
  Eigen::MatrixXd positions;  // n_blocks x dim
  Eigen::MatrixXd momenta;    // n_blocks x dim
  Eigen::VectorXd kinetic;    // per-block CM kinetic energy
};

BlockCmVars block_cm_variables(const PhaseState& state, const BlockPartition& blocks,
                               const BodyConfig& cfg);

// Observables of one member at one sample time.
struct SampleRow {
  double time = 0.0;
  Eigen::VectorXd cm_position;
  Eigen::VectorXd cm_momentum;
  double e_cm = 0.0;
  double e_total = 0.0;
  double rel_kinetic = 0.0;
  Eigen::MatrixXd block_positions;  // n_blocks x dim
  Eigen::MatrixXd block_momenta;    // n_blocks x dim
  Eigen::VectorXd block_kinetic;    // n_blocks
};

struct EnsembleSamples {
  int dim = 1;
  BlockPartition blocks;
  std::vector<double> times;                      // actual recorded times
  std::vector<std::vector<SampleRow>> members;    // [member][time index]
};

// Integrates n_members independent trajectories (seeds base_seed + j) and
// samples observables at the requested times (snapped to the nearest
// step). `workers` > 1 runs members on a thread pool; results are written
// into per-member slots and reduced in member order, so the output is
// identical for any worker count.
EnsembleSamples run_ensemble(const BodyConfig& cfg, const PairPotential& pair,
                             const ExternalPotential& external,
                             const ScenarioSpec& scenario,
                             const IntegratorParams& params,
                             const EnsembleSpec& spec, int workers);

// First four cumulants of a scalar sample with jackknife standard errors.
// k2 and k4 use the unbiased k-statistic estimators. Requires at least 4
// samples (ConfigError otherwise).
struct CumulantReport {
  long n = 0;
  double mean = 0.0, variance = 0.0, k3 = 0.0, k4 = 0.0;
  double se_mean = 0.0, se_variance = 0.0, se_k3 = 0.0, se_k4 = 0.0;
};

CumulantReport cumulants(const std::vector<double>& samples);

// Cross-member correlation matrix of per-block scalars. samples is
// (n_members x n_blocks). Blocks whose sample variance vanishes are
// flagged degenerate and excluded from the max statistics instead of
// producing NaN comparisons.
struct IndependenceReport {
  Eigen::MatrixXd correlation;       // n_blocks x n_blocks, NaN where degenerate
  std::vector<bool> degenerate;      // per block
  double max_abs_adjacent = 0.0;     // |corr| over pairs (b, b+1)
  double max_abs_nonadjacent = 0.0;  // |corr| over pairs further apart
};

IndependenceReport independence_test(const Eigen::MatrixXd& samples);

// Sample standard deviation (k2-based) with a delete-one jackknife SE.
// With `relative` the spread is divided by |mean| (ConfigError when the
// mean vanishes). Needs at least 4 samples.
struct SpreadEstimate {
  double delta = 0.0;
  double se = 0.0;
  double mean = 0.0;
};

SpreadEstimate jackknife_spread(const std::vector<double>& xs, bool relative);

// System-size scaling of fluctuation magnitudes. For each N the ensemble
// scenario is rerun and the spread of an observable at the last sample
// time is recorded; slopes come from a weighted least-squares fit of
// log(delta) against log(N).
struct ScalingPoint {
  int n_atoms = 0;
  double delta = 0.0;  // fluctuation magnitude (see observable note)
  double se = 0.0;     // jackknife SE of delta
  bool excluded = false;
  std::string note;
};

struct ScalingFit {
  bool valid = false;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double slope_ci95 = 0.0;  // 1.96 * slope_se
  int n_points = 0;
};

struct ScalingObservable {
  std::string name;  // "P_x", ..., "E_total_rel", "E_cm_rel"
  std::vector<ScalingPoint> points;
  ScalingFit fit;
};

struct ScalingReport {
  std::vector<int> n_list;
  std::vector<ScalingObservable> observables;

  const ScalingObservable* find(const std::string& name) const;
};

// Weighted least squares of log(delta) on log(n_atoms), weights
// 1 / se_log^2 with se_log = se / delta floored at 1e-12. Points marked
// excluded are skipped; the fit is invalid with fewer than 2 points left.
ScalingFit wls_loglog(const std::vector<ScalingPoint>& pts);

// Reruns the ensemble for every N in n_list (body geometry rescaled, all
// other parameters shared) and fits the fluctuation scaling. Momentum
// components use the absolute ensemble spread; energies use the spread
// relative to the ensemble mean. Near-zero spreads (< 1e-10 absolute, or
// relative for energies) are excluded from fits with a note.
ScalingReport scaling_study(const BodyConfig& body_template, const PairPotential& pair,
                            const ExternalPotential& external,
                            const ScenarioSpec& scenario,
                            const IntegratorParams& params, const EnsembleSpec& spec,
                            const std::vector<int>& n_list, int workers);

}  // namespace emergence
