// Steady-state Gaussian fluctuations around a stable equilibrium of the
// lossy trimer. In the displaced, spin-rotated frame the quadratic operator
// expectations close on themselves: their equations of motion form a linear
// system M f + v = 0 whose solution carries every second moment, in
// particular the fluctuation photon numbers whose divergence exponents
// characterize the transitions.

#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trimer/params.hpp"
#include "trimer/stability.hpp"

namespace trimer {

// Operator-pair families, in the canonical order used throughout. a_n are
// the cavity fluctuation modes, b_n the rotated-frame spin modes.
//   aa   <a_n a_m>            adad <a_n^dag a_m^dag>   ada <a_n^dag a_m>
//   bb   <b_n b_m>            bdbd <b_n^dag b_m^dag>   bdb <b_n^dag b_m>
//   ab   <a_n b_m>            adbd <a_n^dag b_m^dag>
//   adb  <a_n^dag b_m>        bda  <b_n^dag a_m>
// The exchange-symmetric families (aa, adad, bb, bdbd) store n <= m only,
// which leaves 78 independent complex entries.
enum class MomentFamily { aa, adad, ada, bb, bdbd, bdb, ab, adbd, adb, bda };

inline constexpr int n_moments = 78;

// Position of <pair(n, m)> in the canonical vector: families in the order
// above, each block lexicographic in (n, m) after exchange normalization.
int moment_index(MomentFamily fam, int n, int m);

// Inverse of the conjugation pairing: the index holding the moment whose
// complex conjugate equals the one at idx.
int conjugate_index(int idx);

struct SecondMoments {
  Eigen::VectorXcd values;  // n_moments entries, canonical order

  cplx get(MomentFamily fam, int n, int m) const;

  // Re<a_n^dag a_n> per site
  std::array<double, n_sites> photon_numbers() const;

  // worst mismatch over all conjugate-related pairs
  double hermiticity_error() const;

  // smallest eigenvalue of the 3x3 matrix <a_n^dag a_m>; negative beyond
  // roundoff would violate positivity of the state
  double min_photon_eigenvalue() const;
};

// Per-site vertex factors of the quadratic Hamiltonian in the rotated
// frame, fixed by the equilibrium spin direction. At a dark site with the
// spin on the south pole they reduce to lam_pp = lambda eta+,
// lam_mm = -lambda eta-, lam_pm = lam_mp = 0.
struct CouplingCoefficients {
  std::array<cplx, n_sites> lam_pp{}, lam_pm{}, lam_mp{}, lam_mm{};
  std::array<double, n_sites> spin_freq{};  // omega_a / cos(theta_n)
};

// Throws std::invalid_argument when a spin points into the upper
// hemisphere (cos theta <= 0), where no stable rotated frame exists.
CouplingCoefficients coupling_coefficients(const ModelParams& p,
                                           const SemiclassicalState& s);

struct MomentSystem {
  Eigen::MatrixXcd M;  // n_moments x n_moments
  Eigen::VectorXcd v;  // inhomogeneity, from the contact term in <a b>
};

// Equations of motion of all quadratic pair expectations around the
// equilibrium, derived by commutator algebra from the rotated-frame
// Hamiltonian and the photon-loss dissipator. The equilibrium must not be
// linearly unstable (max Re eigenvalue <= 1e-9).
MomentSystem assemble_moment_system(const ModelParams& p, const Equilibrium& e);

struct MomentSolution {
  SecondMoments moments;
  // ||M f + v||_inf of the refined extended-precision iterate that the
  // returned moments are rounded from
  double residual = 0.0;
  bool invertible = false;
};

// Dense LU solve of M f = -v, carried out in extended precision with
// iterative refinement so the residual stays small even where moments
// diverge near a bifurcation. Throws std::runtime_error when M is
// numerically singular (no unique steady state, e.g. the closed-system
// limit).
MomentSolution solve_steady_moments(const MomentSystem& sys);

MomentSolution steady_moments(const ModelParams& p, const Equilibrium& e);

struct ScalingOptions {
  double window_lo = 1e-4;  // |delta g| closest to the bifurcation
  double window_hi = 1e-2;
  int points = 25;
  ContinuationOptions continuation{.verify_oscillation = false};
};

struct ScalingPoint {
  double delta_g = 0.0;
  std::array<double, n_sites> n_ph{};
  double residual = 0.0;
  double herm_err = 0.0;  // worst conjugate-pair mismatch of the solution
  double psd_min = 0.0;   // smallest eigenvalue of the photon Gram matrix
  bool det_ok = false;
};

struct ScalingFit {
  double g_star = 0.0;        // detected bifurcation coupling
  BifurcationKind kind = BifurcationKind::stability_flip;
  EquilibriumClass cls = EquilibriumClass::normal;  // fitted branch
  std::vector<ScalingPoint> points;                 // descending delta_g
  // n_ph ~ |delta g|^{-exponent}; positive means divergence
  std::array<double, n_sites> exponent{};
  std::array<double, n_sites> fit_rms{};  // log10 fit residuals
  bool conclusive = false;
  std::string diagnostics;
};

// Follows the branch from g_from toward g_to until it terminates (stability
// crossing, or a merge into a parent branch detected from the continuation
// losing the class), then solves the moment system on log-spaced couplings
// on the stable side and fits the photon-number divergence exponents.
ScalingFit scaling_fit(const ModelParams& p, double g_from, double g_to,
                       const SemiclassicalState& seed,
                       const ScalingOptions& opts = {});

}  // namespace trimer
