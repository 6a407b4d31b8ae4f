// Mean-field dynamics of the lossy trimer. Each site carries a cavity
// amplitude alpha_n = <a_n>/sqrt(N_a) and a classical spin direction
// (X_n, Y_n, Z_n) = <J_n>/N_a confined to the sphere of radius 1/2. The
// equations of motion couple them bilinearly; photon loss kappa contracts
// the cavity sector while the spin flow is conservative.

#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trimer/landscape.hpp"
#include "trimer/params.hpp"

namespace trimer {

struct SemiclassicalState {
  std::array<cplx, n_sites> alpha{};
  std::array<double, n_sites> sx{}, sy{}, sz{};

  // worst per-site violation of X^2 + Y^2 + Z^2 = 1/4
  double spin_norm_error() const;
  void renormalize_spins();
};

SemiclassicalState apply_parity(const SemiclassicalState& s);
SemiclassicalState apply_translation(const SemiclassicalState& s);

// normal state with every spin at a pole (sign = -1 for the south pole,
// which is the stable one)
SemiclassicalState normal_state(int pole_sign = -1);

// lift a stationary field configuration of the energy landscape to a
// closed-system equilibrium: spins follow the fields through
// X = -2 lambda eta+ Re(alpha)/Omega, Y = 2 lambda eta- Im(alpha)/Omega,
// Z = -omega_a/(2 Omega) with Omega the dressed atomic frequency
SemiclassicalState state_from_fields(const ModelParams& p,
                                     const FieldConfiguration& f);

SemiclassicalState rhs(const ModelParams& p, const SemiclassicalState& s);
double rhs_norm(const ModelParams& p, const SemiclassicalState& s);

// conserved when kappa = 0
double mean_field_energy(const ModelParams& p, const SemiclassicalState& s);

struct Trajectory {
  ModelParams params;
  std::vector<double> times;
  std::vector<SemiclassicalState> states;
  bool uniform_sampling = false;
  double sample_dt = 0.0;   // spacing when uniform
  double norm_drift = 0.0;  // worst spin-norm error seen before projection
};

struct StiffnessError : std::runtime_error {
  Trajectory partial;
  StiffnessError(const std::string& what, Trajectory traj)
      : std::runtime_error(what), partial(std::move(traj)) {}
};

struct IntegrateOptions {
  double tol = 1e-10;      // absolute and relative tolerance
  double sample_dt = 0.0;  // > 0: uniform dense-output sampling; 0: per step
};

// Adaptive fifth-order integration with dense output. Spins are projected
// back to the sphere whenever the norm drifts beyond 1e-12. Throws
// StiffnessError (carrying the partial trajectory) on step-size underflow.
Trajectory integrate(const ModelParams& p, const SemiclassicalState& s0,
                     double t_end, const IntegrateOptions& opts = {});

struct PowerSpectrum {
  std::vector<double> freq;   // angular frequency
  std::vector<double> power;  // |F[|alpha_site|]|^2, unnormalized
  std::string window = "hann";
};

// Discrete spectrum of |alpha_site(t)|. The trajectory must be uniformly
// sampled; throws std::invalid_argument otherwise, or if fewer than 16
// samples are available.
PowerSpectrum power_spectrum(const Trajectory& traj, int site);

enum class AttractorKind { equilibrium, periodic, quasiperiodic, chaotic, inconclusive };
enum class Synchrony { uniform, two_one, lagged, none };

struct AttractorReport {
  AttractorKind kind = AttractorKind::inconclusive;
  std::optional<double> period;
  std::vector<double> base_frequencies;
  double lyapunov_max = 0.0;
  std::array<std::vector<double>, n_sites> extrema;  // local extrema of |alpha_n|
  Synchrony synchrony = Synchrony::none;
  std::string diagnostics;
  SemiclassicalState final_state;
};

struct ClassifyOptions {
  double t_transient = 500.0;
  double t_measure = 2000.0;
  double sample_dt = 0.05;
  double tol = 1e-10;
};

// Discards the transient, then decides between a fixed point (state
// variation < 1e-8), a periodic orbit (spectral comb plus a recurrence
// check on the full state, largest Lyapunov exponent below 1e-3), a
// quasiperiodic torus (two incommensurate base frequencies) and chaos
// (Lyapunov exponent above 1e-2).
AttractorReport classify_attractor(const ModelParams& p,
                                   const SemiclassicalState& s0,
                                   const ClassifyOptions& opts = {});

// Largest Lyapunov exponent from the tangent-space flow along the
// trajectory, renormalized once per unit time.
double lyapunov_max(const ModelParams& p, const SemiclassicalState& s0,
                    double t, double tol = 1e-10);

struct BurstRecord {
  bool is_burst = false;
  double period = 0.0;     // T of the underlying orbit
  double lag = 0.0;        // site-to-site shift, T/3 for the burst phase
  double lag_error = 0.0;  // |lag - T/3| / T
  double amplitude = 0.0;  // burst peak above the plateau level
  std::string diagnostics;
};

// Looks for plateau-plus-burst structure in |alpha_n(t)| on a periodic
// trajectory and measures the cyclic site lag.
BurstRecord detect_burst(const Trajectory& traj);

struct EscapeRecord {
  std::vector<double> escape_times;  // censored entries equal t_max
  std::vector<bool> escaped;
  double t_max = 0.0;
};

// Escape-time statistics of an ensemble of perturbed initial conditions:
// time until the cavity fields stay below 1e-4 (collapse onto the normal
// state) for a sustained window.
EscapeRecord detect_transient_chaos(const ModelParams& p,
                                    const std::vector<SemiclassicalState>& ics,
                                    double t_max);

// random points for ensembles: cavity fields in a disc of the given
// radius, spins uniform on the sphere
SemiclassicalState random_state(double radius, unsigned long long seed);

}  // namespace trimer
