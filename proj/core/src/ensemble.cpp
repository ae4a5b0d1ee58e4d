#include "emergence/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace emergence {

void EnsembleSpec::validate() const {
  if (n_members < 2) throw ConfigError("ensemble.n_members must be >= 2");
  if (sample_times.empty()) throw ConfigError("ensemble.sample_times must be non-empty");
  double prev = 0.0;
  for (double t : sample_times) {
    if (!(t > prev))
      throw ConfigError("ensemble.sample_times must be strictly increasing and > 0");
    prev = t;
  }
  if (n_blocks < 1) throw ConfigError("ensemble.n_blocks must be >= 1");
}

BlockPartition BlockPartition::equal_split(const BodyConfig& cfg, int n_blocks) {
  if (n_blocks < 1 || n_blocks > cfg.n_atoms)
    throw ConfigError("block count must be in [1, n_atoms]");
  BlockPartition part;
  const int base = cfg.n_atoms / n_blocks;
  const int rem = cfg.n_atoms % n_blocks;
  int begin = 0;
  for (int b = 0; b < n_blocks; ++b) {
    // Remainder atoms extend the last block.
    const int count = base + (b == n_blocks - 1 ? rem : 0);
    part.ranges.emplace_back(begin, begin + count);
    part.masses.push_back(count * cfg.atom_mass);
    begin += count;
  }
  return part;
}

BlockCmVars block_cm_variables(const PhaseState& state, const BlockPartition& blocks,
                               const BodyConfig& cfg) {
  check_shapes(state, cfg);
  const int nb = blocks.n_blocks();
  BlockCmVars vars;
  vars.positions.resize(nb, cfg.dim);
  vars.momenta.resize(nb, cfg.dim);
  vars.kinetic.resize(nb);
  for (int b = 0; b < nb; ++b) {
    const auto [lo, hi] = blocks.ranges[b];
    const int count = hi - lo;
    vars.positions.row(b) = state.positions.middleRows(lo, count).colwise().mean();
    vars.momenta.row(b) = state.momenta.middleRows(lo, count).colwise().sum();
    vars.kinetic[b] = vars.momenta.row(b).squaredNorm() / (2.0 * blocks.masses[b]);
  }
  return vars;
}

namespace {

std::vector<long> sample_steps(const IntegratorParams& params,
                               const std::vector<double>& times) {
  std::vector<long> steps;
  for (double t : times) {
    const long k = std::lround(t / params.dt);
    if (k < 1 || k > params.n_steps)
      throw ConfigError("sample time " + std::to_string(t) +
                        " falls outside the integrated trajectory");
    steps.push_back(k);
  }
  return steps;
}

SampleRow make_row(const PhaseState& s, const BodyConfig& cfg, const PairPotential& pair,
                   const ExternalPotential& external, const BlockPartition& blocks) {
  SampleRow row;
  row.time = s.time;
  row.cm_position = s.positions.colwise().mean().transpose();
  row.cm_momentum = s.momenta.colwise().sum().transpose();
  row.e_cm = cm_energy(s, cfg, external);
  row.e_total = total_energy(s, cfg, pair, external);
  row.rel_kinetic = kinetic_decomposition(s, cfg).rel;
  const BlockCmVars vars = block_cm_variables(s, blocks, cfg);
  row.block_positions = vars.positions;
  row.block_momenta = vars.momenta;
  row.block_kinetic = vars.kinetic;
  return row;
}

}  // namespace

EnsembleSamples run_ensemble(const BodyConfig& cfg, const PairPotential& pair,
                             const ExternalPotential& external,
                             const ScenarioSpec& scenario, const IntegratorParams& params,
                             const EnsembleSpec& spec, int workers) {
  cfg.validate();
  params.validate();
  spec.validate();
  check_scenario_compatible(scenario, external);
  if (workers < 1) throw ConfigError("workers must be >= 1");

  const std::vector<long> steps = sample_steps(params, spec.sample_times);

  EnsembleSamples out;
  out.dim = cfg.dim;
  out.blocks = BlockPartition::equal_split(cfg, spec.n_blocks);
  for (long k : steps) out.times.push_back(k * params.dt);
  out.members.resize(spec.n_members);

  // Each member integrates independently and writes only its own slot, so
  // the result is identical for any worker count.
  auto run_member = [&](int j) {
    PhaseState s = prepare_scenario(cfg, pair, external, scenario,
                                    spec.base_seed + static_cast<std::uint64_t>(j));
    std::vector<SampleRow>& rows = out.members[j];
    rows.reserve(steps.size());
    long done = 0;
    for (long target : steps) {
      advance(s, cfg, pair, external, params.dt, target - done, done);
      done = target;
      rows.push_back(make_row(s, cfg, pair, external, out.blocks));
    }
  };

  if (workers == 1) {
    for (int j = 0; j < spec.n_members; ++j) run_member(j);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto worker_loop = [&] {
      for (;;) {
        const int j = next.fetch_add(1);
        if (j >= spec.n_members) break;
        try {
          run_member(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          break;
        }
      }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, spec.n_members);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker_loop);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return out;
}

CumulantReport cumulants(const std::vector<double>& samples) {
  const long n = static_cast<long>(samples.size());
  if (n < 4)
    throw ConfigError("cumulant estimators need at least 4 samples, got " +
                      std::to_string(n));

  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;

  // Centered power sums; centering keeps the k-statistics well conditioned
  // when the mean dominates the spread.
  double t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0;
  std::vector<double> y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    y[i] = samples[i] - mean;
    const double v = y[i];
    t1 += v;
    t2 += v * v;
    t3 += v * v * v;
    t4 += v * v * v * v;
  }

  auto kstats = [](double n_d, double m2, double m3, double m4, double& k2, double& k3,
                   double& k4) {
    k2 = n_d / (n_d - 1.0) * m2;
    k3 = n_d * n_d / ((n_d - 1.0) * (n_d - 2.0)) * m3;
    k4 = n_d * n_d *
         ((n_d + 1.0) * m4 - 3.0 * (n_d - 1.0) * m2 * m2) /
         ((n_d - 1.0) * (n_d - 2.0) * (n_d - 3.0));
  };

  CumulantReport rep;
  rep.n = n;
  rep.mean = mean;
  {
    const double nd = static_cast<double>(n);
    kstats(nd, t2 / nd, t3 / nd, t4 / nd, rep.variance, rep.k3, rep.k4);
  }

  // Delete-one jackknife from the shared power sums (O(n) total).
  const double nd1 = static_cast<double>(n - 1);
  std::vector<double> jk_mean(n), jk_k2(n), jk_k3(n), jk_k4(n);
  for (long i = 0; i < n; ++i) {
    const double v = y[i];
    const double mu = (t1 - v) / nd1;  // leave-one-out mean of centered data
    const double r2 = (t2 - v * v) / nd1;
    const double r3 = (t3 - v * v * v) / nd1;
    const double r4 = (t4 - v * v * v * v) / nd1;
    const double m2 = r2 - mu * mu;
    const double m3 = r3 - 3.0 * mu * r2 + 2.0 * mu * mu * mu;
    const double m4 = r4 - 4.0 * mu * r3 + 6.0 * mu * mu * r2 - 3.0 * mu * mu * mu * mu;
    jk_mean[i] = mean + mu;
    kstats(nd1, m2, m3, m4, jk_k2[i], jk_k3[i], jk_k4[i]);
  }

  auto jackknife_se = [n](const std::vector<double>& theta) {
    double avg = 0.0;
    for (double t : theta) avg += t;
    avg /= n;
    double ss = 0.0;
    for (double t : theta) ss += (t - avg) * (t - avg);
    return std::sqrt((n - 1.0) / n * ss);
  };

  rep.se_mean = jackknife_se(jk_mean);
  rep.se_variance = jackknife_se(jk_k2);
  rep.se_k3 = jackknife_se(jk_k3);
  rep.se_k4 = jackknife_se(jk_k4);
  return rep;
}

IndependenceReport independence_test(const Eigen::MatrixXd& samples) {
  const long m = samples.rows();
  const long nb = samples.cols();
  if (m < 2) throw ConfigError("independence test needs at least 2 samples");

  IndependenceReport rep;
  rep.correlation.setConstant(nb, nb, std::numeric_limits<double>::quiet_NaN());
  rep.degenerate.assign(nb, false);

  const Eigen::RowVectorXd means = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - means;
  Eigen::VectorXd sd(nb);
  for (long b = 0; b < nb; ++b) {
    sd[b] = std::sqrt(centered.col(b).squaredNorm() / (m - 1));
    if (sd[b] < 1e-14 * (std::abs(means[b]) + 1.0)) rep.degenerate[b] = true;
  }

  for (long b = 0; b < nb; ++b) {
    rep.correlation(b, b) = rep.degenerate[b] ? std::numeric_limits<double>::quiet_NaN()
                                              : 1.0;
    for (long c = b + 1; c < nb; ++c) {
      if (rep.degenerate[b] || rep.degenerate[c]) continue;
      const double cov = centered.col(b).dot(centered.col(c)) / (m - 1);
      const double corr = cov / (sd[b] * sd[c]);
      rep.correlation(b, c) = corr;
      rep.correlation(c, b) = corr;
      if (c == b + 1)
        rep.max_abs_adjacent = std::max(rep.max_abs_adjacent, std::abs(corr));
      else
        rep.max_abs_nonadjacent = std::max(rep.max_abs_nonadjacent, std::abs(corr));
    }
  }
  return rep;
}

SpreadEstimate jackknife_spread(const std::vector<double>& xs, bool relative) {
  const long n = static_cast<long>(xs.size());
  if (n < 4) throw ConfigError("spread estimate needs at least 4 samples");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double t1 = 0.0, t2 = 0.0;
  std::vector<double> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    y[i] = xs[i] - mean;
    t1 += y[i];
    t2 += y[i] * y[i];
  }
  auto spread = [&](double total1, double total2, double n_d, double mu_full) {
    const double mu = total1 / n_d;
    const double var = std::max(0.0, (total2 / n_d - mu * mu) * n_d / (n_d - 1.0));
    const double sd = std::sqrt(var);
    if (!relative) return sd;
    const double denom = std::abs(mu_full + mu);
    if (denom == 0.0) throw ConfigError("relative spread undefined: zero mean");
    return sd / denom;
  };

  SpreadEstimate est;
  est.mean = mean;
  est.delta = spread(t1, t2, static_cast<double>(n), mean);

  std::vector<double> theta(n);
  for (long i = 0; i < n; ++i)
    theta[i] = spread(t1 - y[i], t2 - y[i] * y[i], static_cast<double>(n - 1), mean);
  double avg = 0.0;
  for (double t : theta) avg += t;
  avg /= n;
  double ss = 0.0;
  for (double t : theta) ss += (t - avg) * (t - avg);
  est.se = std::sqrt((n - 1.0) / n * ss);
  return est;
}

ScalingFit wls_loglog(const std::vector<ScalingPoint>& pts) {
  ScalingFit fit;
  double s = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int used = 0;
  for (const ScalingPoint& p : pts) {
    if (p.excluded) continue;
    const double x = std::log(static_cast<double>(p.n_atoms));
    const double yv = std::log(p.delta);
    const double se_log = std::max(p.se / p.delta, 1e-12);
    const double w = 1.0 / (se_log * se_log);
    s += w;
    sx += w * x;
    sy += w * yv;
    sxx += w * x * x;
    sxy += w * x * yv;
    ++used;
  }
  fit.n_points = used;
  if (used < 2) return fit;
  const double det = s * sxx - sx * sx;
  if (det <= 0.0) return fit;
  fit.valid = true;
  fit.slope = (s * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  fit.slope_se = std::sqrt(s / det);
  fit.slope_ci95 = 1.96 * fit.slope_se;
  return fit;
}

const ScalingObservable* ScalingReport::find(const std::string& name) const {
  for (const auto& obs : observables)
    if (obs.name == name) return &obs;
  return nullptr;
}

ScalingReport scaling_study(const BodyConfig& body_template, const PairPotential& pair,
                            const ExternalPotential& external, const ScenarioSpec& scenario,
                            const IntegratorParams& params, const EnsembleSpec& spec,
                            const std::vector<int>& n_list, int workers) {
  if (n_list.size() < 4)
    throw ConfigError("scaling study needs at least 4 system sizes");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 2) throw ConfigError("scaling study sizes must be >= 2");
    if (i > 0 && n_list[i] <= n_list[i - 1])
      throw ConfigError("scaling study sizes must be strictly increasing");
  }

  ScalingReport report;
  report.n_list = n_list;

  const char* axis_names[3] = {"x", "y", "z"};
  std::vector<ScalingObservable> obs;
  for (int c = 0; c < body_template.dim; ++c)
    obs.push_back({std::string("P_") + axis_names[c], {}, {}});
  obs.push_back({"E_total_rel", {}, {}});
  obs.push_back({"E_cm_rel", {}, {}});

  for (int n_atoms : n_list) {
    BodyConfig cfg = body_template;
    cfg.n_atoms = n_atoms;
    const EnsembleSamples samples =
        run_ensemble(cfg, pair, external, scenario, params, spec, workers);
    const std::size_t t_last = samples.times.size() - 1;

    auto collect = [&](auto&& get) {
      std::vector<double> xs;
      xs.reserve(samples.members.size());
      for (const auto& member : samples.members) xs.push_back(get(member[t_last]));
      return xs;
    };

    for (int c = 0; c < cfg.dim; ++c) {
      const SpreadEstimate est = jackknife_spread(
          collect([c](const SampleRow& r) { return r.cm_momentum[c]; }), false);
      ScalingPoint pt{n_atoms, est.delta, est.se, false, ""};
      if (est.delta < 1e-10) {
        pt.excluded = true;
        pt.note = "near-zero spread";
      }
      obs[c].points.push_back(pt);
    }
    const SpreadEstimate e_tot = jackknife_spread(
        collect([](const SampleRow& r) { return r.e_total; }), true);
    {
      ScalingPoint pt{n_atoms, e_tot.delta, e_tot.se, false, ""};
      if (e_tot.delta < 1e-10) {
        pt.excluded = true;
        pt.note = "near-zero spread";
      }
      obs[cfg.dim].points.push_back(pt);
    }
    const SpreadEstimate e_cm = jackknife_spread(
        collect([](const SampleRow& r) { return r.e_cm; }), true);
    {
      ScalingPoint pt{n_atoms, e_cm.delta, e_cm.se, false, ""};
      if (e_cm.delta < 1e-10) {
        pt.excluded = true;
        pt.note = "near-zero spread";
      }
      obs[cfg.dim + 1].points.push_back(pt);
    }
  }

  for (auto& o : obs) o.fit = wls_loglog(o.points);
  report.observables = std::move(obs);
  return report;
}

}  // namespace emergence
