// Re-quantization of the classical energy surface around a minimum. The six
// real field components (Re a_n, Im a_n) form canonical pairs with an
// effective Planck constant omega0/(omega_a Na), so the Hessian of the
// scaled energy plays the role of a quadratic Hamiltonian. Symplectic
// normal coordinates bring each mode to
//   (1/2) (k_q dq'^2 + k_p dp'^2),
// quoted in the gauge where the dq' coefficient vector has unit 2-norm.
// The geometric mean sqrt(k_q k_p) is the quantized excitation scale; the
// q/p asymmetry near a continuous transition decides whether ground-state
// quadrature fluctuations diverge or stay finite.

#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "trimer/landscape.hpp"
#include "trimer/params.hpp"
#include "trimer/quadratic.hpp"

namespace trimer {

struct CurvatureMode {
  double k_q = 0.0;
  double k_p = 0.0;
  Vec6 q_direction = Vec6::Zero();  // unit coefficient vector of dq'
};

struct CurvatureNormalForm {
  Mat6 d = Mat6::Zero();               // field-space Hessian at the minimum
  std::array<CurvatureMode, 3> modes;  // ascending sqrt(k_q k_p)
  Eigen::MatrixXd s;                   // 6x6 symplectic transform of williamson
  double planck_eff = 0.0;             // omega0 / (omega_a n_atoms)
};

// Normal form at a strict local minimum. Throws std::invalid_argument when
// the Hessian has a direction more negative than -1e-10 (saddle input).
CurvatureNormalForm curvature_at_minimum(const ModelParams& p,
                                         const GroundState& gs);

// Quantized energy scale of mode i: sqrt(k_q k_p) * planck_eff.
double mode_energy_scale(const CurvatureNormalForm& cnf, int mode);

// Width of the mode's Gaussian ground state along dq', in units of the
// effective Planck scale: (1/2) sqrt(k_p / k_q). Diverges as k_q/k_p -> 0.
double semiclassical_variance(const CurvatureNormalForm& cnf, int mode);

// Cavity quadrature variances <q_n^2> assembled from all modes; the atom
// number and frequency ratios cancel, so these compare directly with the
// q2 entries of ground_variance.
std::array<double, n_sites> sc_quadrature_variance(const CurvatureNormalForm& cnf);

enum class FluctuationClass { finite, divergent };

struct SoftModeScaling {
  int mode = 0;       // index in the ascending-energy order of the grid
  double d_q = 0.0;   // fitted |dg| exponent of k_q
  double d_p = 0.0;   // fitted |dg| exponent of k_p
  double residual = 0.0;
  bool inconclusive = false;
  FluctuationClass cls = FluctuationClass::finite;
};

// Approach the transition from the normal side over dg in [1e-5, 1e-2]
// (30 log-spaced points), fit k_q, k_p ~ dg^d for every mode whose energy
// scale closes, and classify: divergent when the two exponents differ by
// more than 0.2, finite otherwise. Fits with max residual above a quarter
// decade are flagged inconclusive.
std::vector<SoftModeScaling> classify_fluctuations(const ModelParams& p);

struct DeterminantScaling {
  double slope = 0.0;  // log-log slope of |det(i Omega D)| against dg
  double gamma = 0.0;  // soft-mode exponent, slope / 2
  double residual = 0.0;
};

// det(i Omega D) on the frustrated branch at g = g_f + dg. Only the soft
// pair scales, so the fitted slope is twice the soft-mode exponent.
DeterminantScaling fsp_determinant_scaling(const ModelParams& p);

}  // namespace trimer
