// Equilibria of the lossy mean-field equations, their linear stability, and
// the bifurcations encountered while sweeping the coupling. Equilibria fall
// into four classes: normal (all cavities dark), nfs (all cavities lit and
// identical), mixed (one cavity dark, the other two opposite), and fs (all
// lit, not identical).

#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trimer/dynamics.hpp"
#include "trimer/params.hpp"

namespace trimer {

enum class EquilibriumClass { normal, nfs, fs, mixed };

std::string to_string(EquilibriumClass cls);

// Pattern test on the cavity fields alone. Throws std::invalid_argument for
// patterns outside the taxonomy (two dark sites, or one dark site whose
// neighbors are not opposite).
EquilibriumClass classify_state(const SemiclassicalState& s);

struct Equilibrium {
  SemiclassicalState state;
  EquilibriumClass cls = EquilibriumClass::normal;
  bool stable = false;
  std::array<cplx, 12> jacobian_eigs{};  // descending real part

  double max_re() const { return jacobian_eigs[0].real(); }
};

// thrown when a spin sits at a pole and the reduced chart divides by Z
struct ChartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Jacobian12 = Eigen::Matrix<double, 12, 12>;

// Linearization of the flow about a state, in per-site coordinates
// (dRe alpha, dIm alpha, dX, dY) with dZ eliminated through the sphere
// constraint Z dZ = -(X dX + Y dY). Throws ChartError when |Z_n| < 1e-10.
Jacobian12 jacobian(const ModelParams& p, const SemiclassicalState& s);

// Stability spectrum, by the analytic chart away from the poles and by a
// constrained finite-difference linearization at them. Sorted by
// descending real part.
std::array<cplx, 12> stability_eigenvalues(const ModelParams& p,
                                           const SemiclassicalState& s);

// Classify and stability-check a zero of the rhs. Throws
// std::invalid_argument if ||rhs|| exceeds rhs_tol.
Equilibrium analyze_equilibrium(const ModelParams& p,
                                const SemiclassicalState& s,
                                double rhs_tol = 1e-10);

// Damped Newton iteration toward rhs = 0, spins retracted to the sphere
// after every step. Returns nullopt when the iteration stalls.
std::optional<SemiclassicalState> refine_equilibrium(
    const ModelParams& p, const SemiclassicalState& seed, double tol = 1e-12);

struct FindOptions {
  bool want_normal = true;
  bool want_nfs = true;
  bool want_fs = true;
  bool want_mixed = true;
  int random_seeds = 12;
  unsigned long long rng_seed = 77;
};

// All equilibria found from closed-form ansatz solutions (normal, nfs,
// mixed) plus Newton searches seeded from the closed-system landscape and
// random points (fs). One representative per symmetry orbit.
std::vector<Equilibrium> find_equilibria(const ModelParams& p,
                                         const FindOptions& opts = {});

enum class BifurcationKind {
  pitchfork_super,
  pitchfork_sub,
  saddle_node,
  hopf,
  hopf_anomalous,
  stability_flip,
  basin_collision,
  exterior_crisis,
};

std::string to_string(BifurcationKind kind);

struct BifurcationEvent {
  BifurcationKind kind = BifurcationKind::stability_flip;
  // the emergent class for pitchforks, otherwise the class of the branch
  // the event sits on
  EquilibriumClass branch_class = EquilibriumClass::normal;
  double g = 0.0, eta = 0.0, phi = 0.0, kappa = 0.0;
  std::string eigen_signature;
  double osc_frequency = 0.0;
};

struct BranchPoint {
  double g = 0.0;
  Equilibrium eq;
};

struct Branch {
  EquilibriumClass cls = EquilibriumClass::normal;
  std::vector<BranchPoint> points;
  std::vector<BifurcationEvent> events;
  bool lost = false;  // Newton stopped converging before the range end
  double g_last = 0.0;
};

struct ContinuationOptions {
  double step = 0.0;  // 0: one 400th of the range
  double min_step = 1e-9;
  double flip_tol = 1e-6;  // |Re s| target when refining a crossing
  // integrate past each conjugate-pair crossing and only keep the hopf
  // label when an oscillation is actually observed
  bool verify_oscillation = true;
};

// Natural-parameter continuation of one equilibrium branch from g_from to
// g_to (either direction), with adaptive step halving, eigenvalue tracking
// by continuity, and event classification at every real-part crossing.
Branch branch_continuation(ModelParams p, double g_from, double g_to,
                           const SemiclassicalState& seed,
                           const ContinuationOptions& opts = {});

struct BoundaryCurve {
  BifurcationKind kind = BifurcationKind::stability_flip;
  EquilibriumClass branch_class = EquilibriumClass::normal;
  std::vector<std::array<double, 2>> points;  // (g, eta) along the curve
};

struct BoundaryDiagram {
  std::vector<BoundaryCurve> curves;
  std::vector<BifurcationEvent> fragments;  // events that joined no curve
};

struct BoundaryOptions {
  int n_eta = 21;
  ContinuationOptions continuation{.verify_oscillation = false};
};

// Event curves in the (g, eta) plane at fixed phi and kappa: each eta grid
// line contributes the events of all branches found there; events of equal
// kind and class are linked into curves by nearest neighbors.
BoundaryDiagram boundary_trace(ModelParams p, double eta_lo, double eta_hi,
                               double g_lo, double g_hi,
                               const BoundaryOptions& opts = {});

struct CollisionProbe {
  bool collided = false;
  double linger_time = 0.0;  // mean time spent near the ghost orbit
  EquilibriumClass absorber = EquilibriumClass::normal;
  bool absorber_found = false;
  BifurcationEvent event;  // filled when collided
  std::string diagnostics;
};

// Checks whether a periodic (or chaotic) attractor sampled at nearby
// parameters is gone at p: trajectories restarted on the old orbit must
// linger near it for a while and then settle onto an equilibrium. pre_kind
// selects the event label (exterior_crisis for a chaotic parent).
CollisionProbe detect_basin_collision(
    const ModelParams& p, const Trajectory& orbit_below,
    AttractorKind pre_kind = AttractorKind::periodic, double t_max = 3000.0);

}  // namespace trimer
