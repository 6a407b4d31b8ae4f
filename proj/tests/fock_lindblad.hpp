// Brute-force steady state of one lossy Dicke site on a truncated
// Fock x spin space. Used as an oracle for the Gaussian moment solver.
//
// The Liouvillian preserves excitation parity (photon number + spin
// raising count), so the density matrix of a parity-even initial state
// stays block-diagonal in the two parity sectors. We evolve the two
// blocks with RK4 until the photon number settles and accelerate the
// tail with one Aitken step over three equally spaced late samples.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace trimer_test {

struct FockSteadyResult {
  double n_ph = 0.0;       // extrapolated steady photon number
  double trace_error = 0.0;
};

// omega0, omega_a: bare frequencies; lambda: collective coupling (the
// site couples through 2*lambda*eta_pm/sqrt(n_atoms)); kappa: photon loss.
inline FockSteadyResult fock_steady_photon_number(
    double omega0, double omega_a, double lambda, double eta_p, double eta_m,
    double kappa, long n_atoms, int n_max, double t_final = 20.0,
    double dt = 0.04) {
  using cplx = std::complex<double>;
  using SpMat = Eigen::SparseMatrix<cplx>;
  using Mat = Eigen::MatrixXcd;

  const int nf = n_max + 1;
  const int ns = static_cast<int>(n_atoms) + 1;
  const double j = 0.5 * static_cast<double>(n_atoms);
  const int dim = nf * ns;
  auto idx = [ns](int f, int s) { return f * ns + s; };

  std::vector<int> sub(dim, -1), blk(dim, -1);
  int nd[2] = {0, 0};
  for (int f = 0; f < nf; ++f)
    for (int s = 0; s < ns; ++s) {
      const int p = (f + s) % 2;
      blk[idx(f, s)] = p;
      sub[idx(f, s)] = nd[p]++;
    }

  std::vector<Eigen::Triplet<cplx>> th, ta;
  for (int f = 0; f < nf; ++f)
    for (int s = 0; s < ns; ++s) {
      const double m = static_cast<double>(s) - j;
      th.emplace_back(idx(f, s), idx(f, s), omega0 * f + omega_a * m);
      if (f > 0) ta.emplace_back(idx(f - 1, s), idx(f, s), std::sqrt(f));
    }
  // couplings (2 lam eta+/sqrt(Na)) Jx (a+ad) + (2 lam eta-/sqrt(Na)) iJy (a-ad)
  // with Jx = (J+ + J-)/2 and iJy = (J+ - J-)/2
  const double cp = 2.0 * lambda * eta_p / std::sqrt(static_cast<double>(n_atoms));
  const double cm = 2.0 * lambda * eta_m / std::sqrt(static_cast<double>(n_atoms));
  auto jp = [j](int s) {  // <s+1| J+ |s> with m = s - j
    const double m = static_cast<double>(s) - j;
    return std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  };
  for (int f = 0; f < nf; ++f)
    for (int s = 0; s < ns; ++s)
      for (int df : {-1, +1}) {
        const int f2 = f + df;
        if (f2 < 0 || f2 >= nf) continue;
        const double amp = std::sqrt(static_cast<double>(std::max(f, f2)));
        // a+ad carries +amp on both arms, a-ad flips sign on the raising arm
        const double sgn = (df == -1) ? 1.0 : -1.0;
        if (s + 1 < ns)
          th.emplace_back(idx(f2, s + 1), idx(f, s),
                          cplx(0.5 * jp(s) * amp * (cp + cm * sgn)));
        if (s - 1 >= 0)
          th.emplace_back(idx(f2, s - 1), idx(f, s),
                          cplx(0.5 * jp(s - 1) * amp * (cp - cm * sgn)));
      }

  // H is block-diagonal in parity, a maps block p -> 1-p
  SpMat H[2] = {SpMat(nd[0], nd[0]), SpMat(nd[1], nd[1])};
  SpMat A[2] = {SpMat(nd[1], nd[0]), SpMat(nd[0], nd[1])};
  {
    std::vector<Eigen::Triplet<cplx>> tb[2], tc[2];
    for (const auto& t : th)
      tb[blk[t.col()]].emplace_back(sub[t.row()], sub[t.col()], t.value());
    for (const auto& t : ta)
      tc[blk[t.col()]].emplace_back(sub[t.row()], sub[t.col()], t.value());
    for (int p = 0; p < 2; ++p) {
      H[p].setFromTriplets(tb[p].begin(), tb[p].end());
      A[p].setFromTriplets(tc[p].begin(), tc[p].end());
    }
  }
  Eigen::VectorXd nph_diag[2] = {Eigen::VectorXd(nd[0]), Eigen::VectorXd(nd[1])};
  for (int f = 0; f < nf; ++f)
    for (int s = 0; s < ns; ++s)
      nph_diag[blk[idx(f, s)]](sub[idx(f, s)]) = static_cast<double>(f);

  // start from |0> x |j,-j>, which lives in the even block
  Mat rho[2] = {Mat::Zero(nd[0], nd[0]), Mat::Zero(nd[1], nd[1])};
  rho[0](sub[idx(0, 0)], sub[idx(0, 0)]) = 1.0;

  auto lind = [&](const Mat r[2], Mat out[2]) {
    for (int p = 0; p < 2; ++p) {
      const int q = 1 - p;
      out[p].noalias() = cplx(0, -1) * (H[p] * r[p]);
      out[p].noalias() += cplx(0, 1) * (r[p] * H[p]);
      out[p].noalias() += 2.0 * kappa * (A[q] * r[q] * A[q].adjoint());
      out[p].noalias() -= kappa * nph_diag[p].asDiagonal() * r[p];
      out[p].noalias() -= kappa * r[p] * nph_diag[p].asDiagonal();
    }
  };

  const int steps = static_cast<int>(t_final / dt + 0.5);
  const int quarter = steps / 4;
  Mat k1[2], k2[2], k3[2], k4[2], tmp[2];
  std::vector<double> samples;
  auto measure = [&]() {
    double n = 0.0, tr = 0.0;
    for (int p = 0; p < 2; ++p) {
      n += (nph_diag[p].asDiagonal() * rho[p]).trace().real();
      tr += rho[p].trace().real();
    }
    samples.push_back(n / tr);
    return tr;
  };
  double trace = 1.0;
  for (int s = 0; s < steps; ++s) {
    lind(rho, k1);
    for (int p = 0; p < 2; ++p) tmp[p] = rho[p] + 0.5 * dt * k1[p];
    lind(tmp, k2);
    for (int p = 0; p < 2; ++p) tmp[p] = rho[p] + 0.5 * dt * k2[p];
    lind(tmp, k3);
    for (int p = 0; p < 2; ++p) tmp[p] = rho[p] + dt * k3[p];
    lind(tmp, k4);
    for (int p = 0; p < 2; ++p)
      rho[p] += (dt / 6.0) * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
    if (s + 1 == 2 * quarter || s + 1 == 3 * quarter || s + 1 == steps)
      trace = measure();
  }

  FockSteadyResult res;
  res.trace_error = std::abs(trace - 1.0);
  const double n0 = samples[samples.size() - 3];
  const double n1 = samples[samples.size() - 2];
  const double n2 = samples[samples.size() - 1];
  const double den = (n2 - n1) - (n1 - n0);
  res.n_ph = std::abs(den) > 1e-14 ? n2 - (n2 - n1) * (n2 - n1) / den : n2;
  return res;
}

}  // namespace trimer_test
