// Gaussian excitation theory on top of a stationary field configuration.
// Expanding the Hamiltonian to second order in displaced/rotated bosons and
// collecting quadratures r = (q1, p1, Q1, P1, ..., q3, p3, Q3, P3) (lowercase
// cavity, uppercase spin) gives H_quad = (1/2) r^T H r with H real symmetric
// 12x12. Excitation energies are the symplectic eigenvalues of H.

#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "trimer/landscape.hpp"
#include "trimer/params.hpp"

namespace trimer {

using Mat12 = Eigen::Matrix<double, 12, 12>;

struct SpectralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Block-diagonal symplectic form for n (q,p) pairs: 2n x 2n, with
// [[0,1],[-1,0]] on each pair.
Eigen::MatrixXd symplectic_form(int n);

struct SymplecticSpectrum {
  Eigen::VectorXd eps;  // n/2 symplectic eigenvalues, ascending
  Eigen::MatrixXd s;    // r = S r'; S^T Omega S = Omega, S^T H S = diag(eps_i, eps_i)
  bool zero_mode = false;
};

// Normal-form construction via the eigenvectors of Omega*H with symplectic
// Gram-Schmidt. Works for positive semidefinite H; eigenvalues below
// zero_tol are flagged as zero modes (flat directions; for those blocks the
// transformed matrix is diagonal but the pair of entries is (curvature, 0)).
// Throws SpectralError if H is not symmetric PSD within tolerance.
SymplecticSpectrum williamson(const Eigen::MatrixXd& h, double zero_tol = 1e-6);

// Quadratic form at a stationary configuration. Checks stationarity
// (gradient below 1e-8) and throws std::invalid_argument otherwise.
Mat12 build_hq(const ModelParams& p, const GroundState& gs);

// k = 0 excitation pair in closed form; valid for the normal and uniform
// superradiant phases (site-independent configurations).
std::array<double, 2> k0_dispersion(const ModelParams& p, const GroundState& gs);

struct SiteVariances {
  std::array<double, n_sites> q2{}, p2{};  // cavity quadrature variances
};
// Ground-state variances from the normal-mode transform, covariance
// (1/2) S S^T. Infinite along a flat direction (zero mode present).
SiteVariances ground_variance(const SymplecticSpectrum& ss);

struct SweepPoint {
  double g = 0.0;
  bool ok = false;  // false rows mark solver failures (kept as gaps)
  Phase phase = Phase::normal;
  std::array<double, 6> eps{};     // branch-ordered via continuation
  std::array<double, 2> eps_k0{};  // NaN where the closed form does not apply
  std::array<double, n_sites> var_q{};
  bool zero_mode = false;
  double min_energy = 0.0;
};

// Spectrum along a g grid at fixed (eta, phi). Reuses the previous minimum
// as a seed (branch continuation) and orders the six branches by
// nearest-neighbor matching between consecutive points.
std::vector<SweepPoint> spectrum_sweep(const ModelParams& base,
                                       const std::vector<double>& g_values,
                                       unsigned long long rng_seed = 1234567);

}  // namespace trimer
