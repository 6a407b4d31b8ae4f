// Model definition for a ring of three driven cavities, each containing an
// ensemble of two-level atoms with independently tunable couplings to the
// rotating and counter-rotating interaction channels, plus complex photon
// hopping around the ring.
//
// Per-cavity physics: omega0 a^dag a + omega_a Jz
//                     + (2 lambda / sqrt(Na)) [eta_+ Jx (a + a^dag)
//                                              + eta_- i Jy (a - a^dag)]
// Ring term:          J sum_n (e^{i phi} a_n^dag a_{n+1} + h.c.)
// with eta_± = (1 ± eta)/2 and the dimensionless coupling
// g = 2 lambda / sqrt(omega0 omega_a).
//
// Internally everything is kept in units of omega0; raw-frequency input is
// rescaled on entry.

#pragma once

#include <array>
#include <cmath>
#include <string>

namespace trimer {

inline constexpr int n_sites = 3;

inline int site_next(int n) { return (n + 1) % n_sites; }
inline int site_prev(int n) { return (n + 2) % n_sites; }

struct DerivedCouplings {
  double eta_plus;   // (1 + eta)/2
  double eta_minus;  // (1 - eta)/2
  double lambda;     // g sqrt(omega0 omega_a)/2
  double j;          // jbar * omega0
};

struct ModelParams {
  double omega0 = 1.0;   // cavity frequency (unit of all rates)
  double omega_a = 1.0;  // atomic splitting
  double g = 1.0;        // dimensionless light-matter coupling
  double eta = 1.0;      // anisotropy, eta = 1 recovers the standard model
  double jbar = 0.3;     // hopping J/omega0
  double phi = 0.0;      // hopping phase (artificial gauge flux per link)
  double kappa = 0.0;    // photon loss rate; 0 = closed system
  long n_atoms = 1;      // ensemble size Na (enters semiclassics/fluct. scales)

  DerivedCouplings derived() const {
    return {(1.0 + eta) / 2.0, (1.0 - eta) / 2.0,
            0.5 * g * std::sqrt(omega0 * omega_a), jbar * omega0};
  }

  // Throws std::invalid_argument on unphysical input.
  void validate() const;

  // Stability of the hopping band: both 1 + 2 jbar cos(phi) and
  // 1 - 2 jbar cos(phi - pi/3) must stay positive or the bare photon
  // lattice itself is unstable. Names the violated inequality.
  bool hopping_valid() const;
  std::string hopping_violation() const;  // empty when valid

  // Construct from raw (dimensionful) frequencies; rescales to omega0 units.
  static ModelParams from_raw(double omega0_raw, double omega_a_raw,
                              double lambda_raw, double eta, double j_raw,
                              double phi, double kappa_raw, long n_atoms);
};

// Flat JSON parameter file with exactly the keys
//   omega0, omega_a, g, eta, jbar, phi, kappa, n_atoms
// (any subset; unknown keys are rejected with the offending name).
ModelParams load_params(const std::string& path);
void save_params(const ModelParams& p, const std::string& path);
std::string params_to_json(const ModelParams& p);
ModelParams params_from_json(const std::string& text);

}  // namespace trimer
