// Variational ground-state energy surface of the closed trimer in the
// thermodynamic limit. Cavity fields are the rescaled coherent amplitudes
// abar_n = sqrt(omega0/omega_a) <a_n>/sqrt(Na); with the spins slaved to the
// fields the energy per atom, in units of Na*omega_a, is
//
//   E(abar) = sum_n |abar_n|^2 - (1/2) sqrt(1 + 4 g^2 Abar_n^2)
//           + jbar (e^{i phi} abar_n^* abar_{n+1} + c.c.)
//
// with Abar_n^2 = eta_+^2 (Re abar_n)^2 + eta_-^2 (Im abar_n)^2. Everything
// else in this module (gradients, Hessians, instability couplings, branch
// minimization) derives from this function.

#pragma once

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "trimer/params.hpp"

namespace trimer {

using cplx = std::complex<double>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Packing order: (Re a1, Im a1, Re a2, Im a2, Re a3, Im a3). Re/Im of each
// field form a canonical pair, which the semiclassical analysis relies on.
struct FieldConfiguration {
  std::array<cplx, n_sites> alpha{};

  Vec6 packed() const {
    Vec6 v;
    for (int n = 0; n < n_sites; ++n) {
      v[2 * n] = alpha[n].real();
      v[2 * n + 1] = alpha[n].imag();
    }
    return v;
  }
  static FieldConfiguration unpack(const Vec6& v) {
    FieldConfiguration f;
    for (int n = 0; n < n_sites; ++n) f.alpha[n] = {v[2 * n], v[2 * n + 1]};
    return f;
  }
};

// Discrete symmetries of the energy: Z2 parity, ring translation, and the
// reflection fixing one site (together a group of order 6 on labels, times
// parity).
FieldConfiguration apply_parity(const FieldConfiguration& f);
FieldConfiguration apply_translation(const FieldConfiguration& f);
FieldConfiguration apply_reflection(const FieldConfiguration& f, int fixed_site);

enum class Phase { normal, uniform_sr, frustrated_sr };
const char* phase_name(Phase ph);

double energy(const ModelParams& p, const FieldConfiguration& f);
Vec6 energy_gradient(const ModelParams& p, const FieldConfiguration& f);
Mat6 energy_hessian(const ModelParams& p, const FieldConfiguration& f);

// Closed-form eigenvalues of the normal-phase Hessian, ascending. The two
// k=0 values are nondegenerate, the four finite-k ones come in equal pairs.
Vec6 np_eigenvalues(const ModelParams& p);

struct CriticalCouplings {
  double g_uniform;     // uniform superradiant instability of the NP
  double g_frustrated;  // finite-momentum (frustrated) instability
  double g_c;           // min of the two: actual NP boundary
};
// Ignores p.g. Throws std::domain_error naming the violated hopping
// inequality when the photon lattice itself is unstable.
CriticalCouplings critical_coupling(const ModelParams& p);

// Analytic uniform-superradiant amplitude (one representative; the full set
// is +-alpha, or a U(1) orbit at eta = 0). Empty below the instability.
std::optional<cplx> uniform_sr_amplitude(const ModelParams& p);

// Frustrated-branch onset expansion at eta = 1, dg = g - g_c:
//   Re a1   = r0 dg^(1/2) + r1 dg^(3/2)
//   Re a2,3 = s0 dg^(1/2) + s1 dg^(3/2)
// sign = +-1 selects the parity partner. config() includes the imaginary
// parts, slaved to the real ones exactly as in imag_from_real. Throws
// std::invalid_argument unless eta == 1.
struct FspExpansion {
  double g_c;
  double xi0, xi1;  // reduced quadratic-form coefficients
  double r0, r1, s0, s1;
  double im_pref;  // Im a_n = im_pref (Re a_{n+1} - Re a_{n-1})
  FieldConfiguration config(double dg) const;
};
FspExpansion fsp_expansion(const ModelParams& p, int sign);

// eta = 1 reduction: at stationary points the imaginary parts are slaved to
// the real parts and the energy becomes a function of three real variables.
Eigen::Vector3d imag_from_real(const ModelParams& p, const Eigen::Vector3d& re);
double reduced_fsp_energy(const ModelParams& p, const Eigen::Vector3d& re);

struct GroundState {
  FieldConfiguration fields;
  double energy;
  Phase phase;
  std::array<double, n_sites> theta{};  // spin polar rotation angle
  std::array<double, n_sites> chi{};    // spin azimuthal rotation angle
  Vec6 hessian_eigs;                    // ascending, at the minimum
  int orbit_size = 1;                   // discrete degeneracy (1, 2 or 6)
  bool u1_orbit = false;                // continuous orbit at eta = 0
};

struct MinimizeOptions {
  double grad_tol = 1e-12;
  int max_iter = 300;
  int random_seeds = 20;
  unsigned long long rng_seed = 1234567;
  std::vector<FieldConfiguration> extra_seeds;
};

// Damped Newton descent from the structured seed set (origin, +-uniform
// amplitude, six frustrated onset sign patterns, seeded uniform randoms in
// |alpha| <= 2g). Deterministic for fixed options. Throws std::runtime_error
// with the best energy seen if nothing converges.
GroundState minimize_ground_state(const ModelParams& p,
                                  const MinimizeOptions& opts = {});

// Lowest local minimum restricted to one phase's basin (used for metastable
// branch energies). Empty when no converged minimum classifies to `ph`.
std::optional<GroundState> branch_minimum(const ModelParams& p, Phase ph,
                                          const MinimizeOptions& opts = {});

// g where the frustrated and uniform branch energies cross at fixed
// (eta, phi): the first-order wall between the two superradiant phases.
// Bisection to 1e-6. Empty when either branch is missing or no sign change.
std::optional<double> first_order_crossing(const ModelParams& p, double g_lo,
                                           double g_hi);

// phi where g_uniform(phi) = g_frustrated(phi) at fixed eta (tricritical
// flux). Bisection to 1e-10. Empty when no sign change in [phi_lo, phi_hi].
std::optional<double> boundary_flux_crossing(const ModelParams& p,
                                             double phi_lo, double phi_hi);

// Spin rotation angles of a stationary field configuration (theta against
// the pole, chi in-plane), per site. Zero field gives zero angles.
void stationary_angles(const ModelParams& p, const FieldConfiguration& f,
                       std::array<double, n_sites>& theta,
                       std::array<double, n_sites>& chi);

}  // namespace trimer
