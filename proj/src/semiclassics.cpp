#include "trimer/semiclassics.hpp"

#include <cmath>
#include <stdexcept>

#include "trimer/fit.hpp"

namespace trimer {

namespace {

// 30 log-spaced couplings distances, per the fit-window choice: below 1e-5
// the near-singular Hessian runs out of double precision.
std::vector<double> dg_grid() {
  std::vector<double> dg(30);
  const double lo = std::log10(1e-5), hi = std::log10(1e-2);
  for (int i = 0; i < 30; ++i)
    dg[i] = std::pow(10.0, lo + (hi - lo) * i / 29.0);
  return dg;
}

GroundState normal_state(const ModelParams& p) {
  GroundState gs;
  gs.fields = FieldConfiguration{};
  gs.energy = energy(p, gs.fields);
  gs.phase = Phase::normal;
  Eigen::SelfAdjointEigenSolver<Mat6> es(energy_hessian(p, gs.fields));
  gs.hessian_eigs = es.eigenvalues();
  gs.orbit_size = 1;
  return gs;
}

}  // namespace

CurvatureNormalForm curvature_at_minimum(const ModelParams& p,
                                         const GroundState& gs) {
  CurvatureNormalForm cnf;
  cnf.d = energy_hessian(p, gs.fields);
  Eigen::SelfAdjointEigenSolver<Mat6> es(cnf.d);
  if (es.eigenvalues()(0) < -1e-10)
    throw std::invalid_argument(
        "curvature_at_minimum: configuration is a saddle (Hessian eigenvalue " +
        std::to_string(es.eigenvalues()(0)) + ")");

  // Small zero tolerance: soft modes arbitrarily close to a transition are
  // genuine oscillators here, not flat directions.
  SymplecticSpectrum ws = williamson(cnf.d, 1e-12);
  const Eigen::MatrixXd omega = symplectic_form(n_sites);
  // symplectic inverse, S^-1 = -Omega S^T Omega
  const Eigen::MatrixXd sinv = -omega * ws.s.transpose() * omega;
  for (int i = 0; i < n_sites; ++i) {
    const double c2 = sinv.row(2 * i).squaredNorm();
    cnf.modes[i].k_q = ws.eps(i) * c2;
    cnf.modes[i].k_p = ws.eps(i) / c2;
    cnf.modes[i].q_direction = sinv.row(2 * i).transpose() / std::sqrt(c2);
  }
  cnf.s = ws.s;
  cnf.planck_eff = p.omega0 / (p.omega_a * p.n_atoms);
  return cnf;
}

double mode_energy_scale(const CurvatureNormalForm& cnf, int mode) {
  const auto& m = cnf.modes.at(static_cast<std::size_t>(mode));
  return cnf.planck_eff * std::sqrt(m.k_q * m.k_p);
}

double semiclassical_variance(const CurvatureNormalForm& cnf, int mode) {
  const auto& m = cnf.modes.at(static_cast<std::size_t>(mode));
  if (!(m.k_p > 0.0))
    throw std::domain_error("semiclassical_variance: k_p must be positive");
  return 0.5 * std::sqrt(m.k_p / m.k_q);
}

std::array<double, n_sites> sc_quadrature_variance(const CurvatureNormalForm& cnf) {
  // Vacuum of the normal form has covariance (1/2) S S^T in natural units;
  // mapping the field fluctuations back to cavity quadratures cancels the
  // atom number and frequency ratios, leaving 1/2 at g = 0 as it must.
  const Eigen::MatrixXd cov = 0.5 * cnf.s * cnf.s.transpose();
  std::array<double, n_sites> q2{};
  for (int n = 0; n < n_sites; ++n) q2[n] = cov(2 * n, 2 * n);
  return q2;
}

std::vector<SoftModeScaling> classify_fluctuations(const ModelParams& p) {
  const CriticalCouplings cc = critical_coupling(p);
  const std::vector<double> dgs = dg_grid();

  std::array<std::vector<double>, n_sites> kq, kp, eps;
  for (double dg : dgs) {
    ModelParams q = p;
    q.g = cc.g_c - dg;
    const CurvatureNormalForm cnf = curvature_at_minimum(q, normal_state(q));
    for (int i = 0; i < n_sites; ++i) {
      kq[i].push_back(cnf.modes[i].k_q);
      kp[i].push_back(cnf.modes[i].k_p);
      eps[i].push_back(std::sqrt(cnf.modes[i].k_q * cnf.modes[i].k_p));
    }
  }

  std::vector<SoftModeScaling> out;
  for (int i = 0; i < n_sites; ++i) {
    const LogLogFit feps = fit_loglog(dgs, eps[i]);
    if (std::abs(feps.slope) < 0.05) continue;  // gapped mode
    SoftModeScaling sm;
    sm.mode = i;
    const LogLogFit fq = fit_loglog(dgs, kq[i]);
    const LogLogFit fp = fit_loglog(dgs, kp[i]);
    sm.d_q = fq.slope;
    sm.d_p = fp.slope;
    sm.residual = std::max(fq.max_residual, fp.max_residual);
    // a quarter decade of scatter still identifies a power law; genuinely
    // non-algebraic behavior lands far above this
    sm.inconclusive = sm.residual > 0.25;
    sm.cls = std::abs(sm.d_q - sm.d_p) > 0.2 ? FluctuationClass::divergent
                                             : FluctuationClass::finite;
    out.push_back(sm);
  }
  return out;
}

DeterminantScaling fsp_determinant_scaling(const ModelParams& p) {
  const CriticalCouplings cc = critical_coupling(p);
  if (!(cc.g_frustrated < cc.g_uniform))
    throw std::domain_error(
        "fsp_determinant_scaling: frustrated branch is not the one that "
        "condenses at this flux");

  const std::vector<double> dgs = dg_grid();
  std::vector<double> dets;
  dets.reserve(dgs.size());
  for (double dg : dgs) {
    ModelParams q = p;
    q.g = cc.g_frustrated + dg;
    std::optional<GroundState> gs = branch_minimum(q, Phase::frustrated_sr);
    if (!gs) throw std::runtime_error(
        "fsp_determinant_scaling: frustrated minimum not found at g = " +
        std::to_string(q.g));
    const Mat6 d = energy_hessian(q, gs->fields);
    // |det(i Omega D)| = |det D|, Omega being orthogonal-symplectic
    dets.push_back(std::abs(d.determinant()));
  }
  const LogLogFit fit = fit_loglog(dgs, dets);
  DeterminantScaling out;
  out.slope = fit.slope;
  out.gamma = 0.5 * fit.slope;
  out.residual = fit.max_residual;
  return out;
}

}  // namespace trimer
