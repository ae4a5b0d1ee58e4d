#include "emergence/qsim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <fftw3.h>

namespace emergence {

void QuantumParams::validate() const {
  if (!(hbar > 0.0)) throw ConfigError("quantum.hbar must be > 0");
  if (!(dt > 0.0)) throw ConfigError("quantum.dt must be > 0");
  if (n_steps < 1) throw ConfigError("quantum.n_steps must be >= 1");
  if (nx < 8 || nxi < 8) throw ConfigError("quantum grid needs at least 8 points per axis");
  if ((nx & (nx - 1)) != 0 || (nxi & (nxi - 1)) != 0)
    throw ConfigError("quantum grid sizes must be powers of two");
  if (!(extent_x > 0.0) || !(extent_xi > 0.0))
    throw ConfigError("quantum extents must be > 0");
  if (record_stride < 1) throw ConfigError("quantum.record_stride must be >= 1");
}

WaveFunction2P make_packet(const QuantumParams& params, const WavepacketSpec& packet) {
  params.validate();
  if (!(packet.sigma_x > 0.0) || !(packet.sigma_xi > 0.0))
    throw ConfigError("wavepacket widths must be > 0");

  WaveFunction2P psi;
  psi.dx = params.extent_x / params.nx;
  psi.dxi = params.extent_xi / params.nxi;
  psi.x_min = -0.5 * params.extent_x;
  psi.xi_min = -0.5 * params.extent_xi;
  psi.amp.resize(params.nx, params.nxi);

  const std::complex<double> im(0.0, 1.0);
  Eigen::VectorXcd gx(params.nx), gxi(params.nxi);
  for (int i = 0; i < params.nx; ++i) {
    const double x = psi.x_at(i) - packet.x0;
    gx[i] = std::exp(-x * x / (4.0 * packet.sigma_x * packet.sigma_x) +
                     im * packet.k_x * psi.x_at(i));
  }
  for (int j = 0; j < params.nxi; ++j) {
    const double xi = psi.xi_at(j) - packet.xi0;
    gxi[j] = std::exp(-xi * xi / (4.0 * packet.sigma_xi * packet.sigma_xi) +
                      im * packet.k_xi * psi.xi_at(j));
  }
  psi.amp = gx * gxi.transpose();
  psi.amp /= std::sqrt(psi.norm_squared());
  return psi;
}

HamiltonianTerms build_hamiltonian_terms(const ExternalPotential& external,
                                         const PairPotential& pair,
                                         const QuantumParams& params,
                                         const BodyConfig& cfg) {
  params.validate();
  if (cfg.dim != 1)
    throw ConfigError("two-particle quantum runs require a 1D body config");

  HamiltonianTerms terms;
  terms.mass_total = 2.0 * cfg.atom_mass;
  terms.mass_reduced = 0.5 * cfg.atom_mass;

  const double dx = params.extent_x / params.nx;
  const double dxi = params.extent_xi / params.nxi;
  const double x_min = -0.5 * params.extent_x;
  const double xi_min = -0.5 * params.extent_xi;

  // V(X, xi) = V_ext(X + xi/2) + V_ext(X - xi/2) + u(|xi|).
  terms.potential.resize(params.nx, params.nxi);
  Eigen::VectorXd point(1);
  for (int j = 0; j < params.nxi; ++j) {
    const double xi = xi_min + j * dxi;
    const double u = pair_value_at_separation(pair, std::abs(xi));
    for (int i = 0; i < params.nx; ++i) {
      const double x = x_min + i * dx;
      point[0] = x + 0.5 * xi;
      double v = eval_external(external, point, cfg).value;
      point[0] = x - 0.5 * xi;
      v += eval_external(external, point, cfg).value;
      terms.potential(i, j) = v + u;
    }
  }
  if (!terms.potential.allFinite())
    throw ConfigError("potential is singular on the quantum grid "
                      "(pair potential diverges at a grid separation)");

  auto wavenumbers = [](int n, double extent) {
    Eigen::ArrayXd k(n);
    const double base = 2.0 * std::numbers::pi / extent;
    for (int i = 0; i < n; ++i) {
      const int fi = (i <= n / 2) ? i : i - n;
      k[i] = base * fi;
    }
    return k;
  };
  const Eigen::ArrayXd kx = wavenumbers(params.nx, params.extent_x);
  const Eigen::ArrayXd kxi = wavenumbers(params.nxi, params.extent_xi);
  terms.kinetic_x = params.hbar * params.hbar * kx.square() / (2.0 * terms.mass_total);
  terms.kinetic_xi =
      params.hbar * params.hbar * kxi.square() / (2.0 * terms.mass_reduced);
  return terms;
}

double ReducedCmState::trace() const { return rho.trace().real() * dx; }

double ReducedCmState::purity() const { return rho.squaredNorm() * dx * dx; }

ReducedCmState reduce_cm(const WaveFunction2P& psi) {
  ReducedCmState red;
  red.dx = psi.dx;
  red.rho = (psi.amp * psi.amp.adjoint()) * psi.dxi;
  return red;
}

struct SplitOperatorPropagator::Impl {
  QuantumParams params;
  HamiltonianTerms terms;
  Eigen::ArrayXXcd half_kick;         // exp(-i V dt / (2 hbar))
  Eigen::ArrayXXcd half_kick_scaled;  // half_kick / (nx nxi), folds FFT norm
  Eigen::ArrayXXcd kin_phase;         // exp(-i T dt / hbar)
  Eigen::MatrixXcd spectral;          // scratch for expectations
  Eigen::ArrayXXd density, sdens;     // scratch for the experiment loop
  Eigen::ArrayXd hbar_kx, hbar_kxi;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Impl() {
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

SplitOperatorPropagator::SplitOperatorPropagator(const QuantumParams& params,
                                                 const HamiltonianTerms& terms)
    : impl_(new Impl) {
  params.validate();
  impl_->params = params;
  impl_->terms = terms;

  const std::complex<double> im(0.0, 1.0);
  const double dt = params.dt;
  const double hbar = params.hbar;

  impl_->half_kick =
      (-im * dt / (2.0 * hbar) * terms.potential.cast<std::complex<double>>()).exp();
  impl_->half_kick_scaled =
      impl_->half_kick / static_cast<double>(params.nx) / static_cast<double>(params.nxi);

  Eigen::ArrayXXd tsum(params.nx, params.nxi);
  for (int j = 0; j < params.nxi; ++j)
    for (int i = 0; i < params.nx; ++i)
      tsum(i, j) = terms.kinetic_x[i] + terms.kinetic_xi[j];
  impl_->kin_phase = (-im * dt / hbar * tsum.cast<std::complex<double>>()).exp();

  impl_->hbar_kx = (2.0 * terms.mass_total * terms.kinetic_x).sqrt();
  for (int i = params.nx / 2 + 1; i < params.nx; ++i) impl_->hbar_kx[i] *= -1.0;
  impl_->hbar_kxi = (2.0 * terms.mass_reduced * terms.kinetic_xi).sqrt();
  for (int j = params.nxi / 2 + 1; j < params.nxi; ++j) impl_->hbar_kxi[j] *= -1.0;

  impl_->spectral.resize(params.nx, params.nxi);

  // Eigen matrices are column-major, so in memory the grid is an
  // (nxi, nx) row-major array: n0 = nxi, n1 = nx. FFTW_ESTIMATE keeps
  // planning deterministic; FFTW_UNALIGNED lets the plans run on any
  // caller buffer via fftw_execute_dft.
  fftw_complex* scratch = reinterpret_cast<fftw_complex*>(impl_->spectral.data());
  impl_->fwd = fftw_plan_dft_2d(params.nxi, params.nx, scratch, scratch, FFTW_FORWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  impl_->bwd = fftw_plan_dft_2d(params.nxi, params.nx, scratch, scratch, FFTW_BACKWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!impl_->fwd || !impl_->bwd) throw NumericalError("FFTW plan creation failed");
}

SplitOperatorPropagator::~SplitOperatorPropagator() = default;

void SplitOperatorPropagator::step(WaveFunction2P& psi) {
  if (psi.amp.rows() != impl_->params.nx || psi.amp.cols() != impl_->params.nxi)
    throw ConfigError("wavefunction grid does not match propagator");
  fftw_complex* data = reinterpret_cast<fftw_complex*>(psi.amp.data());
  psi.amp.array() *= impl_->half_kick;
  fftw_execute_dft(impl_->fwd, data, data);
  psi.amp.array() *= impl_->kin_phase;
  fftw_execute_dft(impl_->bwd, data, data);
  psi.amp.array() *= impl_->half_kick_scaled;
}

QuantumExpectations SplitOperatorPropagator::expectations(const WaveFunction2P& psi) {
  const int nx = impl_->params.nx;
  const int nxi = impl_->params.nxi;
  QuantumExpectations ex;

  const Eigen::ArrayXXd density = psi.amp.array().abs2();
  const double total = density.sum();
  ex.norm = total * psi.dx * psi.dxi;

  const Eigen::ArrayXd margx = density.rowwise().sum();
  double xm = 0.0, x2 = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double x = psi.x_at(i);
    xm += x * margx[i];
    x2 += x * x * margx[i];
  }
  ex.x_mean = xm / total;
  ex.x_var = x2 / total - ex.x_mean * ex.x_mean;

  const Eigen::ArrayXd margxi = density.colwise().sum().transpose();
  double xim = 0.0, xi2 = 0.0;
  for (int j = 0; j < nxi; ++j) {
    const double xi = psi.xi_at(j);
    xim += xi * margxi[j];
    xi2 += xi * xi * margxi[j];
  }
  ex.xi_mean = xim / total;
  ex.xi_var = xi2 / total - ex.xi_mean * ex.xi_mean;

  const double vmean = (impl_->terms.potential * density).sum() / total;

  impl_->spectral = psi.amp;
  fftw_complex* data = reinterpret_cast<fftw_complex*>(impl_->spectral.data());
  fftw_execute_dft(impl_->fwd, data, data);
  const Eigen::ArrayXXd sdensity = impl_->spectral.array().abs2();
  const double stotal = sdensity.sum();

  const Eigen::ArrayXd margk = sdensity.rowwise().sum();
  double pm = 0.0, p2 = 0.0, tkin = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double hk = impl_->hbar_kx[i];
    pm += hk * margk[i];
    p2 += hk * hk * margk[i];
    tkin += impl_->terms.kinetic_x[i] * margk[i];
  }
  const Eigen::ArrayXd margkxi = sdensity.colwise().sum().transpose();
  for (int j = 0; j < nxi; ++j) tkin += impl_->terms.kinetic_xi[j] * margkxi[j];

  ex.p_mean = pm / stotal;
  ex.p_var = p2 / stotal - ex.p_mean * ex.p_mean;
  ex.energy = tkin / stotal + vmean;
  return ex;
}

double SplitOperatorPropagator::boundary_amplitude_ratio(const WaveFunction2P& psi) {
  const double peak = psi.amp.cwiseAbs().maxCoeff();
  if (peak == 0.0) return 0.0;
  double edge = psi.amp.row(0).cwiseAbs().maxCoeff();
  edge = std::max(edge, psi.amp.row(psi.amp.rows() - 1).cwiseAbs().maxCoeff());
  edge = std::max(edge, psi.amp.col(0).cwiseAbs().maxCoeff());
  edge = std::max(edge, psi.amp.col(psi.amp.cols() - 1).cwiseAbs().maxCoeff());
  return edge / peak;
}

double expectation_gap(const WaveFunction2P& psi, const ExternalPotential& external,
                       const BodyConfig& cfg) {
  const Eigen::ArrayXXd density = psi.amp.array().abs2();
  const Eigen::ArrayXd margx = density.rowwise().sum();
  const double total = margx.sum();

  Eigen::VectorXd point(1);
  double wmean = 0.0, xmean = 0.0;
  for (int i = 0; i < margx.size(); ++i) {
    point[0] = psi.x_at(i);
    wmean += 2.0 * eval_external(external, point, cfg).value * margx[i];
    xmean += psi.x_at(i) * margx[i];
  }
  wmean /= total;
  xmean /= total;
  point[0] = xmean;
  return wmean - 2.0 * eval_external(external, point, cfg).value;
}

namespace {

// Max |f'(t_k) - g(t_k)| over the interior using the 4th-order central
// stencil; the series must have uniform spacing dt.
double max_derivative_residual(const std::vector<double>& f, const std::vector<double>& g,
                               double dt, double sign_g) {
  double worst = 0.0;
  for (std::size_t k = 2; k + 2 < f.size(); ++k) {
    const double d =
        (-f[k + 2] + 8.0 * f[k + 1] - 8.0 * f[k - 1] + f[k - 2]) / (12.0 * dt);
    worst = std::max(worst, std::abs(d - sign_g * g[k]));
  }
  return worst;
}

}  // namespace

QuantumRunRecord factorization_experiment(const ExternalPotential& external,
                                          const PairPotential& pair,
                                          const QuantumParams& params,
                                          const WavepacketSpec& packet,
                                          const BodyConfig& cfg) {
  params.validate();
  if (cfg.n_atoms != 2)
    throw ConfigError("the factorization experiment uses exactly 2 atoms");

  const HamiltonianTerms terms = build_hamiltonian_terms(external, pair, params, cfg);
  SplitOperatorPropagator prop(params, terms);
  WaveFunction2P psi = make_packet(params, packet);

  // Per-step grids for the Ehrenfest force: dV/dX at (X +- xi/2) and the
  // point-object potential W(X) = 2 V(X) for the expectation gap.
  Eigen::ArrayXXd dvdx(params.nx, params.nxi);
  Eigen::ArrayXd w_of_x(params.nx);
  {
    Eigen::VectorXd point(1);
    for (int i = 0; i < params.nx; ++i) {
      point[0] = psi.x_at(i);
      w_of_x[i] = 2.0 * eval_external(external, point, cfg).value;
    }
    for (int j = 0; j < params.nxi; ++j) {
      const double xi = psi.xi_at(j);
      for (int i = 0; i < params.nx; ++i) {
        const double x = psi.x_at(i);
        point[0] = x + 0.5 * xi;
        double d = eval_external(external, point, cfg).gradient[0];
        point[0] = x - 0.5 * xi;
        d += eval_external(external, point, cfg).gradient[0];
        dvdx(i, j) = d;
      }
    }
  }

  QuantumRunRecord rec;
  const long n = params.n_steps;
  rec.times.reserve(n + 1);
  rec.x_mean.reserve(n + 1);
  rec.p_mean.reserve(n + 1);
  rec.x_var.reserve(n + 1);
  rec.p_var.reserve(n + 1);
  rec.energy.reserve(n + 1);
  rec.norm.reserve(n + 1);
  rec.expectation_gap.reserve(n + 1);
  std::vector<double> force_mean;
  force_mean.reserve(n + 1);

  // One |psi|^2 pass and one spectral pass per step feed every per-step
  // observable; buffers live in the propagator and are never reallocated.
  Eigen::ArrayXXd& density = prop.impl_->density;
  Eigen::ArrayXXd& sdens = prop.impl_->sdens;
  Eigen::VectorXd point(1);
  for (long s = 0;; ++s) {
    density = psi.amp.array().abs2();
    const double total = density.sum();
    rec.times.push_back(s * params.dt);
    rec.norm.push_back(total * psi.dx * psi.dxi);

    const Eigen::ArrayXd margx = density.rowwise().sum();
    double xm = 0.0, x2 = 0.0;
    for (int i = 0; i < params.nx; ++i) {
      const double x = psi.x_at(i);
      xm += x * margx[i];
      x2 += x * x * margx[i];
    }
    const double x_mean = xm / total;
    rec.x_mean.push_back(x_mean);
    rec.x_var.push_back(x2 / total - x_mean * x_mean);

    const double vmean = (terms.potential * density).sum() / total;
    const double wmean = (w_of_x * margx).sum() / total;
    point[0] = x_mean;
    rec.expectation_gap.push_back(wmean -
                                  2.0 * eval_external(external, point, cfg).value);
    force_mean.push_back((dvdx * density).sum() / total);

    prop.impl_->spectral = psi.amp;
    fftw_complex* sdata = reinterpret_cast<fftw_complex*>(prop.impl_->spectral.data());
    fftw_execute_dft(prop.impl_->fwd, sdata, sdata);
    sdens = prop.impl_->spectral.array().abs2();
    const double stotal = sdens.sum();
    const Eigen::ArrayXd margk = sdens.rowwise().sum();
    double pm = 0.0, p2 = 0.0, tkin = 0.0;
    for (int i = 0; i < params.nx; ++i) {
      const double hk = prop.impl_->hbar_kx[i];
      pm += hk * margk[i];
      p2 += hk * hk * margk[i];
      tkin += terms.kinetic_x[i] * margk[i];
    }
    const Eigen::ArrayXd margkxi = sdens.colwise().sum().transpose();
    for (int j = 0; j < params.nxi; ++j) tkin += terms.kinetic_xi[j] * margkxi[j];
    const double p_mean = pm / stotal;
    rec.p_mean.push_back(p_mean);
    rec.p_var.push_back(p2 / stotal - p_mean * p_mean);
    rec.energy.push_back(tkin / stotal + vmean);

    if (s % params.record_stride == 0 || s == n) {
      rec.purity_times.push_back(s * params.dt);
      rec.purity.push_back(reduce_cm(psi).purity());
    }

    // Guard on |psi|^2: |edge| > 1e-10 |peak| squared, no sqrt per cell.
    const double x_edge2 = std::max(density.row(0).maxCoeff(),
                                    density.row(density.rows() - 1).maxCoeff());
    const double xi_edge2 = std::max(density.col(0).maxCoeff(),
                                     density.col(density.cols() - 1).maxCoeff());
    const double peak2 = density.maxCoeff();
    if (x_edge2 > 1e-20 * peak2)
      throw GuardError("wavepacket amplitude reached the grid boundary along X at step " +
                       std::to_string(s));
    if (xi_edge2 > 1e-20 * peak2)
      throw GuardError(
          "wavepacket amplitude reached the grid boundary along xi at step " +
          std::to_string(s));

    if (s == n) break;
    prop.step(psi);
  }

  std::vector<double> p_over_m(rec.p_mean.size());
  for (std::size_t k = 0; k < p_over_m.size(); ++k)
    p_over_m[k] = rec.p_mean[k] / terms.mass_total;
  rec.ehrenfest_residual_x =
      max_derivative_residual(rec.x_mean, p_over_m, params.dt, 1.0);
  rec.ehrenfest_residual_p =
      max_derivative_residual(rec.p_mean, force_mean, params.dt, -1.0);
  return rec;
}

}  // namespace emergence
