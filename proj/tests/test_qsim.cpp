#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "emergence/qsim.hpp"

using namespace emergence;

namespace {

BodyConfig pair_body(double mass = 1.0) {
  BodyConfig cfg;
  cfg.n_atoms = 2;
  cfg.dim = 1;
  cfg.atom_mass = mass;
  return cfg;
}

QuantumParams grid(int n, double extent, double dt = 1e-3, long n_steps = 100) {
  QuantumParams params;
  params.nx = n;
  params.nxi = n;
  params.extent_x = extent;
  params.extent_xi = extent;
  params.dt = dt;
  params.n_steps = n_steps;
  return params;
}

const ExternalPotential kFreeExternal = Polynomial{{{}}, {std::nullopt}};
const PairPotential kFreePair = HarmonicSpring{0.0, 0.0};

// CM frequency in Harmonic{omega} is omega itself; the relative mode sees
// the external quarter-term plus the spring: omega_xi^2 = (m omega^2 / 2
// + stiffness) / mu.
double omega_xi(double omega, double stiffness, double m) {
  return std::sqrt((0.5 * m * omega * omega + stiffness) / (0.5 * m));
}

// Ground width of the relative mode, sqrt(hbar / (2 mu omega)).
double ground_sigma_xi(double w_xi, double m) { return std::sqrt(1.0 / (m * w_xi)); }

}  // namespace

TEST_CASE("Gaussian packet moments match the construction parameters") {
  const QuantumParams params = grid(128, 40.0);
  WavepacketSpec packet;
  packet.x0 = 0.7;
  packet.sigma_x = 1.2;
  packet.k_x = 2.0;
  packet.xi0 = -0.4;
  packet.sigma_xi = 0.8;
  packet.k_xi = -1.0;

  const BodyConfig cfg = pair_body();
  const HamiltonianTerms terms = build_hamiltonian_terms(kFreeExternal, kFreePair,
                                                         params, cfg);
  SplitOperatorPropagator prop(params, terms);
  const WaveFunction2P psi = make_packet(params, packet);
  const QuantumExpectations ex = prop.expectations(psi);

  CHECK(ex.norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ex.x_mean == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(ex.x_var == doctest::Approx(1.44).epsilon(1e-9));
  CHECK(ex.xi_mean == doctest::Approx(-0.4).epsilon(1e-9));
  CHECK(ex.xi_var == doctest::Approx(0.64).epsilon(1e-9));
  CHECK(ex.p_mean == doctest::Approx(2.0).epsilon(1e-9));
  // Momentum density variance of a width-sigma packet is hbar^2/(4 sigma^2).
  CHECK(ex.p_var == doctest::Approx(1.0 / (4.0 * 1.44)).epsilon(1e-9));
  const double t_x = (ex.p_var + 4.0) / (2.0 * terms.mass_total);
  const double t_xi = (1.0 / (4.0 * 0.64) + 1.0) / (2.0 * terms.mass_reduced);
  CHECK(ex.energy == doctest::Approx(t_x + t_xi).epsilon(1e-9));

  WavepacketSpec centered;
  const QuantumExpectations sym = prop.expectations(make_packet(params, centered));
  CHECK(std::abs(sym.x_mean) < 1e-10);
  CHECK(std::abs(sym.p_mean) < 1e-10);
}

TEST_CASE("grid potential separates for harmonic and gravity but not quartic") {
  const QuantumParams params = grid(64, 12.0);
  const BodyConfig cfg = pair_body(1.3);
  const int i0 = 32, j0 = 32;  // grid centre: X = xi = 0 exactly

  auto cross_term = [&](const HamiltonianTerms& terms, int i, int j) {
    return terms.potential(i, j) - terms.potential(i, j0) - terms.potential(i0, j) +
           terms.potential(i0, j0);
  };

  const HamiltonianTerms harm =
      build_hamiltonian_terms(Harmonic{1.3}, HarmonicSpring{0.9, 0.0}, params, cfg);
  const HamiltonianTerms grav =
      build_hamiltonian_terms(Gravity{3.0}, HarmonicSpring{0.9, 0.0}, params, cfg);
  const HamiltonianTerms quart =
      build_hamiltonian_terms(Quartic{1.1, 0.07}, kFreePair, params, cfg);

  const double dx = params.extent_x / params.nx;
  const double dxi = params.extent_xi / params.nxi;
  for (int i = 3; i < params.nx; i += 13) {
    for (int j = 5; j < params.nxi; j += 11) {
      const double x = -6.0 + i * dx;
      const double xi = -6.0 + j * dxi;
      CHECK(std::abs(cross_term(harm, i, j)) < 1e-10);
      CHECK(std::abs(cross_term(grav, i, j)) < 1e-10);
      CHECK(cross_term(quart, i, j) ==
            doctest::Approx(3.0 * 0.07 * x * x * xi * xi).epsilon(1e-8).scale(1.0));

      // Pointwise binomial identity for the quartic pieces.
      const double m = cfg.atom_mass;
      const double harmonic_part = m * 1.1 * 1.1 * (x * x + 0.25 * xi * xi);
      const double quartic_part =
          0.07 * (2.0 * std::pow(x, 4) + 3.0 * x * x * xi * xi + std::pow(xi, 4) / 8.0);
      CHECK(quart.potential(i, j) ==
            doctest::Approx(harmonic_part + quartic_part).epsilon(1e-10).scale(1.0));

      const double grav_expected =
          2.0 * m * 3.0 * x + 0.5 * 0.9 * xi * xi;
      CHECK(grav.potential(i, j) ==
            doctest::Approx(grav_expected).epsilon(1e-10).scale(1.0));
    }
  }

  // Kinetic dispersion tables: hbar^2 k^2 / (2 mass) at the first mode.
  CHECK(harm.mass_total == doctest::Approx(2.6));
  CHECK(harm.mass_reduced == doctest::Approx(0.65));
  CHECK(harm.kinetic_x[0] == 0.0);
  const double k1 = 2.0 * std::numbers::pi / params.extent_x;
  CHECK(harm.kinetic_x[1] == doctest::Approx(k1 * k1 / (2.0 * 2.6)).epsilon(1e-12));
  CHECK(harm.kinetic_x[params.nx - 1] == doctest::Approx(harm.kinetic_x[1]));
  CHECK(harm.kinetic_xi[1] == doctest::Approx(k1 * k1 / (2.0 * 0.65)).epsilon(1e-12));
}

TEST_CASE("singular pair potential on the grid is rejected") {
  const QuantumParams params = grid(64, 12.0);  // even grid includes xi = 0
  CHECK_THROWS_AS(build_hamiltonian_terms(kFreeExternal,
                                          LennardJonesTruncated{1.0, 1.0, 2.5}, params,
                                          pair_body()),
                  ConfigError);
}

TEST_CASE("free packet disperses along both axes per the closed form") {
  const QuantumParams params = grid(128, 40.0, 1e-3, 1200);
  WavepacketSpec packet;
  packet.sigma_x = 1.0;
  packet.sigma_xi = 1.0;
  packet.k_x = 2.0;

  const BodyConfig cfg = pair_body();
  const HamiltonianTerms terms = build_hamiltonian_terms(kFreeExternal, kFreePair,
                                                         params, cfg);
  SplitOperatorPropagator prop(params, terms);
  WaveFunction2P psi = make_packet(params, packet);
  for (long s = 0; s < params.n_steps; ++s) prop.step(psi);
  const QuantumExpectations ex = prop.expectations(psi);

  const double t = params.n_steps * params.dt;
  const double var_x = 1.0 + std::pow(t / (2.0 * terms.mass_total * 1.0), 2);
  const double var_xi = 1.0 + std::pow(t / (2.0 * terms.mass_reduced * 1.0), 2);
  CHECK(ex.x_var == doctest::Approx(var_x).epsilon(1e-10));
  CHECK(ex.xi_var == doctest::Approx(var_xi).epsilon(1e-10));
  CHECK(ex.x_mean == doctest::Approx(2.0 / terms.mass_total * t).epsilon(1e-10));
  CHECK(ex.p_mean == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(ex.p_var == doctest::Approx(0.25).epsilon(1e-10));  // free: momentum frozen
  CHECK(std::abs(ex.norm - 1.0) < 1e-11);
}

TEST_CASE("coherent state oscillates at the trap frequency") {
  // x0 = 1, CM ground width: a displaced ground state swings without
  // breathing, <X>(t) = x0 cos(omega t).
  const BodyConfig cfg = pair_body();
  WavepacketSpec packet;
  packet.x0 = 1.0;
  packet.sigma_x = 0.5;
  packet.sigma_xi = ground_sigma_xi(omega_xi(1.0, 1.0, 1.0), 1.0);

  const ExternalPotential ext = Harmonic{1.0};
  const PairPotential pair = HarmonicSpring{1.0, 0.0};

  auto run = [&](double dt) {
    QuantumParams params = grid(64, 16.0, dt);
    params.n_steps = std::lround(2.0 * std::numbers::pi / dt);
    params.record_stride = 25;
    return factorization_experiment(ext, pair, params, packet, cfg);
  };

  const QuantumRunRecord coarse = run(2e-3);
  double x_err = 0.0, norm_dev = 0.0, drift_coarse = 0.0, purity_dev = 0.0;
  for (std::size_t s = 0; s < coarse.times.size(); ++s) {
    x_err = std::max(x_err, std::abs(coarse.x_mean[s] - std::cos(coarse.times[s])));
    norm_dev = std::max(norm_dev, std::abs(coarse.norm[s] - 1.0));
    drift_coarse =
        std::max(drift_coarse, std::abs(coarse.energy[s] / coarse.energy[0] - 1.0));
  }
  for (double p : coarse.purity) purity_dev = std::max(purity_dev, std::abs(p - 1.0));

  CHECK(x_err < 1e-3);  // bound stated for amplitude-1 swings
  CHECK(norm_dev < 1e-10);
  CHECK(purity_dev < 1e-9);
  CHECK(coarse.ehrenfest_residual_x < 1e-4);
  CHECK(coarse.ehrenfest_residual_p < 1e-4);

  // Strang splitting: halving dt cuts the energy deviation ~4x.
  const QuantumRunRecord fine = run(1e-3);
  double drift_fine = 0.0;
  for (std::size_t s = 0; s < fine.times.size(); ++s)
    drift_fine = std::max(drift_fine, std::abs(fine.energy[s] / fine.energy[0] - 1.0));
  CHECK(drift_coarse < 5e-6);
  CHECK(drift_fine / drift_coarse == doctest::Approx(0.25).epsilon(0.35));
}

TEST_CASE("separable ground state is stationary") {
  const BodyConfig cfg = pair_body();
  const double w_xi = omega_xi(1.0, 1.0, 1.0);  // sqrt(3)
  QuantumParams params = grid(64, 16.0, 5e-4, 10000);

  WavepacketSpec packet;
  packet.sigma_x = 0.5;  // variance hbar/(2 M omega) = 1/4
  packet.sigma_xi = ground_sigma_xi(w_xi, 1.0);

  const HamiltonianTerms terms = build_hamiltonian_terms(
      Harmonic{1.0}, HarmonicSpring{1.0, 0.0}, params, cfg);
  SplitOperatorPropagator prop(params, terms);
  WaveFunction2P psi = make_packet(params, packet);

  const QuantumExpectations e0 = prop.expectations(psi);
  CHECK(e0.energy == doctest::Approx(0.5 + 0.5 * w_xi).epsilon(1e-9));

  prop.step(psi);
  CHECK(std::abs(psi.norm_squared() - 1.0) < 1e-12);  // unitary per step

  double norm_dev = 0.0, e_drift = 0.0;
  for (long s = 1; s < params.n_steps; ++s) {
    prop.step(psi);
    if (s % 500 == 0) {
      const QuantumExpectations ex = prop.expectations(psi);
      norm_dev = std::max(norm_dev, std::abs(ex.norm - 1.0));
      e_drift = std::max(e_drift, std::abs(ex.energy / e0.energy - 1.0));
    }
  }
  const QuantumExpectations ef = prop.expectations(psi);
  CHECK(std::abs(ef.norm - 1.0) < 1e-9);  // ten thousand steps
  CHECK(norm_dev < 1e-9);
  CHECK(e_drift < 1e-8);
  CHECK(ef.x_var == doctest::Approx(0.25).epsilon(1e-7));
  CHECK(std::abs(ef.x_mean) < 1e-9);
  CHECK(std::abs(ef.p_mean) < 1e-9);
}

TEST_CASE("reduced CM state: product purity, two-hump Schmidt value, PSD spectrum") {
  const QuantumParams params = grid(128, 32.0);
  WavepacketSpec packet;
  packet.x0 = 0.4;
  packet.sigma_x = 0.9;
  packet.xi0 = -0.2;
  packet.sigma_xi = 1.1;
  const WaveFunction2P product = make_packet(params, packet);

  const ReducedCmState pure = reduce_cm(product);
  CHECK(pure.trace() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pure.purity() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((pure.rho - pure.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-14);

  // Correlated two-hump state: equal-weight rank-2 Schmidt decomposition.
  WaveFunction2P hump = product;
  auto blob = [](double u, double c) { return std::exp(-(u - c) * (u - c) / 1.96); };
  for (int i = 0; i < params.nx; ++i)
    for (int j = 0; j < params.nxi; ++j)
      hump.amp(i, j) = blob(hump.x_at(i), -4.0) * blob(hump.xi_at(j), -4.0) +
                       blob(hump.x_at(i), 4.0) * blob(hump.xi_at(j), 4.0);
  hump.amp /= std::sqrt(hump.norm_squared());

  const ReducedCmState mixed = reduce_cm(hump);
  CHECK(mixed.trace() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mixed.purity() == doctest::Approx(0.5).epsilon(1e-6));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(mixed.rho);
  CHECK(eig.eigenvalues().minCoeff() * mixed.dx > -1e-12);
  // Two Schmidt weights of 1/2 (grid measure folds dx into the eigenvalues).
  const Eigen::VectorXd evs = eig.eigenvalues() * mixed.dx;
  CHECK(evs[evs.size() - 1] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(evs[evs.size() - 2] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(evs[evs.size() - 3] < 1e-6);
}

TEST_CASE("anharmonic coupling entangles an initially product state") {
  const BodyConfig cfg = pair_body();
  QuantumParams params = grid(256, 24.0, 1e-3, 1500);
  params.record_stride = 100;
  WavepacketSpec packet;
  packet.x0 = 1.2;
  packet.sigma_x = 0.5;
  packet.sigma_xi = 0.84;

  const QuantumRunRecord rec = factorization_experiment(
      Quartic{1.0, 0.08}, HarmonicSpring{1.0, 0.0}, params, packet, cfg);

  CHECK(rec.purity.front() == doctest::Approx(1.0).epsilon(1e-10));
  // Strictly decreasing at early times; later the trap oscillation gives
  // partial revivals, so only the overall decay is pinned there.
  CHECK(rec.purity[1] < rec.purity[0]);
  CHECK(rec.purity[2] < rec.purity[1]);
  const double purity_min = *std::min_element(rec.purity.begin(), rec.purity.end());
  CHECK(purity_min < 0.999);
  CHECK(purity_min > 0.5);
  CHECK(rec.purity.back() < rec.purity.front() - 1e-3);

  double e_drift = 0.0;
  for (double e : rec.energy)
    e_drift = std::max(e_drift, std::abs(e / rec.energy[0] - 1.0));
  CHECK(e_drift < 1e-6);  // dt = 1e-3 here; shipped runs use smaller steps
}

TEST_CASE("expectation gap identities for fresh packets") {
  const QuantumParams params = grid(128, 32.0);
  const BodyConfig cfg = pair_body();

  WavepacketSpec packet;
  packet.x0 = 0.8;
  packet.sigma_xi = 0.9;

  // Harmonic: W(X) = m omega^2 X^2, so the gap is exactly m omega^2 var(X).
  for (double sigma : {0.5, 1.0, 1.7}) {
    packet.sigma_x = sigma;
    const WaveFunction2P psi = make_packet(params, packet);
    const double gap = expectation_gap(psi, Harmonic{1.4}, cfg);
    CHECK(gap == doctest::Approx(1.4 * 1.4 * sigma * sigma).epsilon(1e-7));
  }

  // Gravity is linear: no gap at all.
  packet.sigma_x = 1.0;
  const WaveFunction2P psi = make_packet(params, packet);
  CHECK(std::abs(expectation_gap(psi, Gravity{2.0}, cfg)) < 1e-10);

  // Quartic: Gaussian moments give the gap in closed form, monotone in sigma.
  const double lambda = 0.05, x0 = 0.8;
  double prev = -1.0;
  for (double sigma : {0.4, 0.8, 1.6}) {
    packet.sigma_x = sigma;
    const double gap =
        expectation_gap(make_packet(params, packet), Quartic{1.0, lambda}, cfg);
    const double s2 = sigma * sigma;
    const double expected =
        s2 + 2.0 * lambda * (6.0 * x0 * x0 * s2 + 3.0 * s2 * s2);
    CHECK(gap == doctest::Approx(expected).epsilon(1e-6));
    CHECK(gap > prev);
    prev = gap;
  }
}

TEST_CASE("doubling the grid or halving dt leaves observables unchanged") {
  const BodyConfig cfg = pair_body();
  const ExternalPotential ext = Quartic{1.0, 0.02};
  const PairPotential pair = HarmonicSpring{1.0, 0.0};
  WavepacketSpec packet;
  packet.x0 = 1.0;
  packet.sigma_x = 0.5;
  packet.sigma_xi = 0.76;

  auto final_x = [&](int n, double dt, long steps) {
    const QuantumParams params = grid(n, 16.0, dt, steps);
    const HamiltonianTerms terms = build_hamiltonian_terms(ext, pair, params, cfg);
    SplitOperatorPropagator prop(params, terms);
    WaveFunction2P psi = make_packet(params, packet);
    for (long s = 0; s < steps; ++s) prop.step(psi);
    return prop.expectations(psi).x_mean;
  };

  const double base = final_x(128, 1e-3, 400);
  CHECK(std::abs(final_x(256, 1e-3, 400) - base) < 1e-6);
  CHECK(std::abs(final_x(128, 5e-4, 800) - base) < 1e-6);
}

TEST_CASE("boundary guard names the offending axis") {
  const BodyConfig cfg = pair_body();
  QuantumParams params = grid(64, 16.0, 1e-3, 1500);
  params.record_stride = 1500;

  // The xi mode must stay confined (stiff spring, ground width) or its
  // dispersion reaches the wall before the boosted CM does.
  const PairPotential stiff = HarmonicSpring{4.0, 0.0};
  WavepacketSpec moving;
  moving.sigma_x = 0.7;
  moving.sigma_xi = ground_sigma_xi(omega_xi(0.0, 4.0, 1.0), 1.0);
  moving.k_x = 5.0;
  bool threw = false;
  try {
    factorization_experiment(kFreeExternal, stiff, params, moving, cfg);
  } catch (const GuardError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("along X") != std::string::npos);
  }
  CHECK(threw);

  moving.k_x = 0.0;
  moving.k_xi = 5.0;  // relative mass is m/2: four times the speed
  params.n_steps = 800;
  threw = false;
  try {
    factorization_experiment(kFreeExternal, kFreePair, params, moving, cfg);
  } catch (const GuardError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("along xi") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("parameter validation") {
  QuantumParams params = grid(100, 16.0);
  CHECK_THROWS_AS(params.validate(), ConfigError);  // not a power of two
  params = grid(4, 16.0);
  CHECK_THROWS_AS(params.validate(), ConfigError);
  params = grid(64, 16.0);
  params.dt = 0.0;
  CHECK_THROWS_AS(params.validate(), ConfigError);
  params = grid(64, -1.0);
  CHECK_THROWS_AS(params.validate(), ConfigError);
  params = grid(64, 16.0);
  params.record_stride = 0;
  CHECK_THROWS_AS(params.validate(), ConfigError);

  const QuantumParams good = grid(64, 16.0);
  WavepacketSpec bad;
  bad.sigma_x = 0.0;
  CHECK_THROWS_AS(make_packet(good, bad), ConfigError);

  BodyConfig wide = pair_body();
  wide.dim = 3;
  CHECK_THROWS_AS(build_hamiltonian_terms(kFreeExternal, kFreePair, good, wide),
                  ConfigError);

  BodyConfig crowd = pair_body();
  crowd.n_atoms = 3;
  CHECK_THROWS_AS(
      factorization_experiment(kFreeExternal, kFreePair, good, WavepacketSpec{}, crowd),
      ConfigError);
}
