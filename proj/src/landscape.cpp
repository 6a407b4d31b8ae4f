#include "trimer/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace trimer {

namespace {

struct SiteTerms {
  double s;      // 1 + 4 g^2 Abar^2
  double rs;     // sqrt(s)
  double abar2;  // Abar^2
};

SiteTerms site_terms(const ModelParams& p, double x, double y) {
  const auto d = p.derived();
  const double a2 = d.eta_plus * d.eta_plus * x * x + d.eta_minus * d.eta_minus * y * y;
  const double s = 1.0 + 4.0 * p.g * p.g * a2;
  return {s, std::sqrt(s), a2};
}

}  // namespace

FieldConfiguration apply_parity(const FieldConfiguration& f) {
  FieldConfiguration r;
  for (int n = 0; n < n_sites; ++n) r.alpha[n] = -f.alpha[n];
  return r;
}

FieldConfiguration apply_translation(const FieldConfiguration& f) {
  FieldConfiguration r;
  for (int n = 0; n < n_sites; ++n) r.alpha[site_next(n)] = f.alpha[n];
  return r;
}

FieldConfiguration apply_reflection(const FieldConfiguration& f, int fixed_site) {
  FieldConfiguration r = f;
  const int a = site_next(fixed_site), b = site_prev(fixed_site);
  r.alpha[a] = f.alpha[b];
  r.alpha[b] = f.alpha[a];
  return r;
}

const char* phase_name(Phase ph) {
  switch (ph) {
    case Phase::normal: return "normal";
    case Phase::uniform_sr: return "uniform_sr";
    case Phase::frustrated_sr: return "frustrated_sr";
  }
  return "?";
}

double energy(const ModelParams& p, const FieldConfiguration& f) {
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  double e = 0.0;
  for (int n = 0; n < n_sites; ++n) {
    const double x = f.alpha[n].real(), y = f.alpha[n].imag();
    const auto st = site_terms(p, x, y);
    const int m = site_next(n);
    const double xm = f.alpha[m].real(), ym = f.alpha[m].imag();
    e += x * x + y * y - 0.5 * st.rs;
    e += 2.0 * p.jbar * (c * (x * xm + y * ym) - s * (x * ym - y * xm));
  }
  return e;
}

Vec6 energy_gradient(const ModelParams& p, const FieldConfiguration& f) {
  const auto d = p.derived();
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  const double g2 = p.g * p.g;
  Vec6 grad;
  for (int n = 0; n < n_sites; ++n) {
    const double x = f.alpha[n].real(), y = f.alpha[n].imag();
    const auto st = site_terms(p, x, y);
    const int np = site_next(n), nm = site_prev(n);
    const double xp = f.alpha[np].real(), yp = f.alpha[np].imag();
    const double xm = f.alpha[nm].real(), ym = f.alpha[nm].imag();
    grad[2 * n] = 2.0 * x - 2.0 * g2 * d.eta_plus * d.eta_plus * x / st.rs +
                  2.0 * p.jbar * (c * (xp + xm) - s * (yp - ym));
    grad[2 * n + 1] = 2.0 * y - 2.0 * g2 * d.eta_minus * d.eta_minus * y / st.rs +
                      2.0 * p.jbar * (c * (yp + ym) + s * (xp - xm));
  }
  return grad;
}

Mat6 energy_hessian(const ModelParams& p, const FieldConfiguration& f) {
  const auto d = p.derived();
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  const double g2 = p.g * p.g, g4 = g2 * g2;
  const double ep2 = d.eta_plus * d.eta_plus, em2 = d.eta_minus * d.eta_minus;
  Mat6 h = Mat6::Zero();
  for (int n = 0; n < n_sites; ++n) {
    const double x = f.alpha[n].real(), y = f.alpha[n].imag();
    const auto st = site_terms(p, x, y);
    const double s32 = st.s * st.rs;
    h(2 * n, 2 * n) = 2.0 - 2.0 * g2 * ep2 / st.rs + 8.0 * g4 * ep2 * ep2 * x * x / s32;
    h(2 * n + 1, 2 * n + 1) =
        2.0 - 2.0 * g2 * em2 / st.rs + 8.0 * g4 * em2 * em2 * y * y / s32;
    h(2 * n, 2 * n + 1) = h(2 * n + 1, 2 * n) = 8.0 * g4 * ep2 * em2 * x * y / s32;
    // hopping couples n to n+1 with an antisymmetric sin(phi) part
    const int m = site_next(n);
    h(2 * n, 2 * m) += 2.0 * p.jbar * c;
    h(2 * m, 2 * n) += 2.0 * p.jbar * c;
    h(2 * n + 1, 2 * m + 1) += 2.0 * p.jbar * c;
    h(2 * m + 1, 2 * n + 1) += 2.0 * p.jbar * c;
    h(2 * n, 2 * m + 1) += -2.0 * p.jbar * s;
    h(2 * m + 1, 2 * n) += -2.0 * p.jbar * s;
    h(2 * n + 1, 2 * m) += 2.0 * p.jbar * s;
    h(2 * m, 2 * n + 1) += 2.0 * p.jbar * s;
  }
  return h;
}

Vec6 np_eigenvalues(const ModelParams& p) {
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  const double g2 = p.g * p.g;
  const double xi1 = 2.0 + 4.0 * p.jbar * c - g2 * (1.0 + p.eta) * (1.0 + p.eta) / 2.0;
  const double xi2 = 2.0 + 4.0 * p.jbar * c - g2 * (1.0 - p.eta) * (1.0 - p.eta) / 2.0;
  const double root =
      std::sqrt(12.0 * p.jbar * p.jbar * s * s + g2 * g2 * p.eta * p.eta);
  const double base = 2.0 - 2.0 * p.jbar * c - g2 * (1.0 + p.eta * p.eta) / 2.0;
  Vec6 v;
  v << xi1, xi2, base + root, base - root, base + root, base - root;
  std::sort(v.data(), v.data() + 6);
  return v;
}

CriticalCouplings critical_coupling(const ModelParams& p) {
  const std::string bad = p.hopping_violation();
  if (!bad.empty()) throw std::domain_error("critical_coupling: " + bad);
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  const auto d = p.derived();
  const double emax = std::max(std::abs(d.eta_plus), std::abs(d.eta_minus));
  const double gu = std::sqrt(1.0 + 2.0 * p.jbar * c) / emax;
  // Root of the soft finite-k eigenvalue. Written via M^2 - N to stay stable
  // through eta -> +-1, where the naive difference of near-equal square
  // roots cancels catastrophically.
  const double w = 1.0 - p.jbar * c;
  const double m = (1.0 + p.eta * p.eta) * w;
  const double nn = 4.0 * p.eta * p.eta * w * w +
                    3.0 * p.jbar * p.jbar * s * s * (1.0 - p.eta * p.eta) *
                        (1.0 - p.eta * p.eta);
  const double num = w * w - 3.0 * p.jbar * p.jbar * s * s;  // > 0 in the valid domain
  const double gf = 2.0 * std::sqrt(num / (m + std::sqrt(nn)));
  return {gu, gf, std::min(gu, gf)};
}

std::optional<cplx> uniform_sr_amplitude(const ModelParams& p) {
  const auto d = p.derived();
  const double b = 1.0 + 2.0 * p.jbar * std::cos(p.phi);
  const double e = (p.eta >= 0.0) ? d.eta_plus : d.eta_minus;
  const double q = p.g * p.g * e * e / b;
  if (q * q <= 1.0) return std::nullopt;
  const double amp = std::sqrt(q * q - 1.0) / (2.0 * p.g * e);
  if (p.eta < 0.0) return cplx{0.0, amp};
  return cplx{amp, 0.0};
}

FspExpansion fsp_expansion(const ModelParams& p, int sign) {
  if (std::abs(p.eta - 1.0) > 1e-12)
    throw std::invalid_argument("fsp_expansion requires eta = 1");
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +-1");
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  const double w = 1.0 - p.jbar * c;
  FspExpansion ex;
  ex.xi0 = 1.0 - 2.0 * p.jbar * p.jbar * s * s / w;
  ex.xi1 = 2.0 * p.jbar * c + 2.0 * p.jbar * p.jbar * s * s / w;
  ex.g_c = std::sqrt(ex.xi0 - ex.xi1 / 2.0);
  const double r3 = std::sqrt(3.0);
  const double gc32 = std::pow(ex.g_c, 1.5), gc52 = std::pow(ex.g_c, 2.5);
  ex.r0 = sign * 2.0 / (r3 * gc32);
  ex.s0 = -sign / (r3 * gc32);
  ex.r1 = sign / (6.0 * r3 * gc52);
  // the uniform admixture pushes both amplitudes the same way, which cancels
  // against the soft-mode correction on site 1 and doubles up on sites 2, 3
  ex.s1 = -sign * (4.0 / (3.0 * r3 * ex.xi1 * std::sqrt(ex.g_c)) +
                   1.0 / (12.0 * r3 * gc52));
  ex.im_pref = -p.jbar * s / w;
  return ex;
}

FieldConfiguration FspExpansion::config(double dg) const {
  if (dg < 0.0) throw std::invalid_argument("fsp expansion needs dg >= 0");
  const double h = std::sqrt(dg), h3 = h * dg;
  Eigen::Vector3d re;
  re << r0 * h + r1 * h3, s0 * h + s1 * h3, s0 * h + s1 * h3;
  FieldConfiguration f;
  for (int n = 0; n < n_sites; ++n)
    f.alpha[n] = {re[n], im_pref * (re[site_next(n)] - re[site_prev(n)])};
  return f;
}

Eigen::Vector3d imag_from_real(const ModelParams& p, const Eigen::Vector3d& re) {
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  const double pref = -p.jbar * s / (1.0 - p.jbar * c);
  Eigen::Vector3d im;
  for (int n = 0; n < n_sites; ++n)
    im[n] = pref * (re[site_next(n)] - re[site_prev(n)]);
  return im;
}

double reduced_fsp_energy(const ModelParams& p, const Eigen::Vector3d& re) {
  if (std::abs(p.eta - 1.0) > 1e-12)
    throw std::invalid_argument("reduced_fsp_energy requires eta = 1");
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  const double w = 1.0 - p.jbar * c;
  const double xi0 = 1.0 - 2.0 * p.jbar * p.jbar * s * s / w;
  const double xi1 = 2.0 * p.jbar * c + 2.0 * p.jbar * p.jbar * s * s / w;
  double e = 0.0;
  for (int n = 0; n < n_sites; ++n) {
    e += xi0 * re[n] * re[n] -
         0.5 * std::sqrt(1.0 + 4.0 * p.g * p.g * re[n] * re[n]) +
         xi1 * re[n] * re[site_next(n)];
  }
  return e;
}

void stationary_angles(const ModelParams& p, const FieldConfiguration& f,
                       std::array<double, n_sites>& theta,
                       std::array<double, n_sites>& chi) {
  const auto d = p.derived();
  for (int n = 0; n < n_sites; ++n) {
    const double x = f.alpha[n].real(), y = f.alpha[n].imag();
    const auto st = site_terms(p, x, y);
    const double a = std::sqrt(st.abar2);
    if (a < 1e-14) {
      theta[n] = 0.0;
      chi[n] = 0.0;
      continue;
    }
    theta[n] = std::acos(std::min(1.0, 1.0 / st.rs));
    chi[n] = std::atan2(-d.eta_minus * y / a, d.eta_plus * x / a);
  }
}

namespace {

struct NewtonResult {
  FieldConfiguration f;
  double e;
  bool converged;
};

NewtonResult newton_descend(const ModelParams& p, FieldConfiguration f,
                            const MinimizeOptions& opts) {
  double e = energy(p, f);
  for (int it = 0; it < opts.max_iter; ++it) {
    Vec6 g = energy_gradient(p, f);
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) return {f, e, true};
    Mat6 h = energy_hessian(p, f);
    Eigen::SelfAdjointEigenSolver<Mat6> es(h);
    double shift = 0.0;
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin < 1e-9) shift = 1e-9 - lmin;
    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      Mat6 hs = h + shift * Mat6::Identity();
      Vec6 step = hs.ldlt().solve(-g);
      double t = 1.0;
      // backtracking on the energy with a weak decrease condition
      for (int bt = 0; bt < 40; ++bt) {
        FieldConfiguration trial = FieldConfiguration::unpack(f.packed() + t * step);
        const double et = energy(p, trial);
        if (et <= e + 1e-4 * t * g.dot(step)) {
          f = trial;
          e = et;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) shift = std::max(shift * 10.0, 1e-6);
    }
    if (!accepted) return {f, e, false};
  }
  Vec6 g = energy_gradient(p, f);
  return {f, e, g.lpNorm<Eigen::Infinity>() < opts.grad_tol};
}

bool same_config(const FieldConfiguration& a, const FieldConfiguration& b,
                 double tol) {
  for (int n = 0; n < n_sites; ++n)
    if (std::abs(a.alpha[n] - b.alpha[n]) > tol) return false;
  return true;
}

Phase classify_phase(const FieldConfiguration& f) {
  double amax = 0.0;
  for (const auto& a : f.alpha) amax = std::max(amax, std::abs(a));
  if (amax < 1e-6) return Phase::normal;
  const bool uniform = std::abs(f.alpha[0] - f.alpha[1]) < 1e-6 &&
                       std::abs(f.alpha[1] - f.alpha[2]) < 1e-6;
  return uniform ? Phase::uniform_sr : Phase::frustrated_sr;
}

std::vector<FieldConfiguration> seed_set(const ModelParams& p,
                                         const MinimizeOptions& opts) {
  std::vector<FieldConfiguration> seeds;
  seeds.push_back({});  // origin
  if (auto u = uniform_sr_amplitude(p)) {
    FieldConfiguration fu;
    fu.alpha = {*u, *u, *u};
    seeds.push_back(fu);
    seeds.push_back(apply_parity(fu));
  }
  // frustrated onset patterns: the eta = 1 expansion shape works as a seed
  // at any eta, so reuse its sign/rotation structure around g_frustrated
  const auto gc = critical_coupling(p);
  if (p.g > gc.g_frustrated) {
    ModelParams q = p;
    q.eta = 1.0;
    for (int sign : {1, -1}) {
      const FspExpansion ex = fsp_expansion(q, sign);
      const double dg = std::min(p.g - gc.g_frustrated, 0.5);
      FieldConfiguration base = ex.config(dg);
      bool finite = true;
      for (int n = 0; n < n_sites; ++n)
        finite = finite && std::isfinite(base.alpha[n].real()) &&
                 std::isfinite(base.alpha[n].imag());
      if (!finite) continue;  // expansion coefficients blow up past phi_tr
      for (int t = 0; t < n_sites; ++t) {
        seeds.push_back(base);
        if (p.eta < 0.0) {
          // negative eta minima are the reflected i-conj images of the
          // positive eta ones
          FieldConfiguration rot = apply_reflection(base, 0);
          for (auto& a : rot.alpha) a = cplx(0, 1) * std::conj(a);
          seeds.push_back(rot);
        }
        base = apply_translation(base);
      }
    }
  }
  std::mt19937_64 rng(opts.rng_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double rad = 2.0 * std::max(p.g, 0.25);
  for (int k = 0; k < opts.random_seeds; ++k) {
    FieldConfiguration f;
    for (int n = 0; n < n_sites; ++n) {
      const double r = rad * std::sqrt(u01(rng));
      const double ph = 2.0 * M_PI * u01(rng);
      f.alpha[n] = std::polar(r, ph);
    }
    seeds.push_back(f);
  }
  for (const auto& f : opts.extra_seeds) seeds.push_back(f);
  return seeds;
}

GroundState finish(const ModelParams& p, const FieldConfiguration& f0, double e) {
  FieldConfiguration f = f0;
  GroundState gs;
  gs.phase = classify_phase(f);
  gs.u1_orbit = (std::abs(p.eta) < 1e-12) && gs.phase != Phase::normal;
  if (gs.u1_orbit) {
    // pick the orbit representative with the first nonzero field real >= 0
    cplx ref = 0.0;
    for (const auto& a : f.alpha)
      if (std::abs(a) > 1e-8) { ref = a; break; }
    if (std::abs(ref) > 0.0) {
      const cplx rot = std::conj(ref) / std::abs(ref);
      for (auto& a : f.alpha) a *= rot;
    }
  }
  gs.fields = f;
  gs.energy = e;
  switch (gs.phase) {
    case Phase::normal: gs.orbit_size = 1; break;
    case Phase::uniform_sr: gs.orbit_size = 2; break;
    case Phase::frustrated_sr: gs.orbit_size = 6; break;
  }
  stationary_angles(p, f, gs.theta, gs.chi);
  Eigen::SelfAdjointEigenSolver<Mat6> es(energy_hessian(p, f));
  gs.hessian_eigs = es.eigenvalues();
  return gs;
}

std::vector<NewtonResult> local_minima(const ModelParams& p,
                                       const MinimizeOptions& opts) {
  std::vector<NewtonResult> minima;
  for (const auto& seed : seed_set(p, opts)) {
    NewtonResult r = newton_descend(p, seed, opts);
    if (!r.converged) continue;
    Eigen::SelfAdjointEigenSolver<Mat6> es(energy_hessian(p, r.f));
    if (es.eigenvalues().minCoeff() < -1e-9) continue;  // saddle
    bool dup = false;
    for (const auto& m : minima) dup = dup || same_config(m.f, r.f, 1e-7);
    if (!dup) minima.push_back(r);
  }
  return minima;
}

}  // namespace

GroundState minimize_ground_state(const ModelParams& p,
                                  const MinimizeOptions& opts) {
  p.validate();
  const std::string bad = p.hopping_violation();
  if (!bad.empty()) throw std::domain_error("minimize_ground_state: " + bad);
  auto minima = local_minima(p, opts);
  if (minima.empty()) {
    std::ostringstream os;
    os << "minimize_ground_state: no converged minimum (g=" << p.g
       << ", eta=" << p.eta << ", phi=" << p.phi << ")";
    throw std::runtime_error(os.str());
  }
  const auto best = std::min_element(
      minima.begin(), minima.end(),
      [](const NewtonResult& a, const NewtonResult& b) { return a.e < b.e; });
  // Within machine precision of a continuous transition the soft direction
  // is flat, and descent can stall at a tiny spurious displacement whose
  // energy matches the normal state to double precision. The normal state
  // is always an exact stationary point: when it is locally stable and the
  // best candidate gains nothing beyond numerical noise, return it exactly.
  const double e_np = energy(p, FieldConfiguration{});
  if (np_eigenvalues(p).minCoeff() >= -1e-10 &&
      best->e >= e_np - 1e-12 * std::abs(e_np))
    return finish(p, FieldConfiguration{}, e_np);
  return finish(p, best->f, best->e);
}

std::optional<GroundState> branch_minimum(const ModelParams& p, Phase ph,
                                          const MinimizeOptions& opts) {
  auto minima = local_minima(p, opts);
  std::optional<GroundState> out;
  for (const auto& m : minima) {
    if (classify_phase(m.f) != ph) continue;
    if (!out || m.e < out->energy) out = finish(p, m.f, m.e);
  }
  return out;
}

std::optional<double> first_order_crossing(const ModelParams& p, double g_lo,
                                           double g_hi) {
  auto diff = [&](double g) -> std::optional<double> {
    ModelParams q = p;
    q.g = g;
    auto fr = branch_minimum(q, Phase::frustrated_sr);
    auto un = branch_minimum(q, Phase::uniform_sr);
    if (!fr || !un) return std::nullopt;
    return fr->energy - un->energy;
  };
  auto dlo = diff(g_lo), dhi = diff(g_hi);
  if (!dlo || !dhi || (*dlo) * (*dhi) > 0.0) return std::nullopt;
  double lo = g_lo, hi = g_hi, flo = *dlo;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    auto dm = diff(mid);
    if (!dm) return std::nullopt;
    if (flo * (*dm) <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = *dm;
    }
  }
  return 0.5 * (lo + hi);
}

std::optional<double> boundary_flux_crossing(const ModelParams& p,
                                             double phi_lo, double phi_hi) {
  auto diff = [&](double phi) {
    ModelParams q = p;
    q.phi = phi;
    const auto gc = critical_coupling(q);
    return gc.g_uniform - gc.g_frustrated;
  };
  double lo = phi_lo, hi = phi_hi;
  double flo = diff(lo), fhi = diff(hi);
  if (flo * fhi > 0.0) return std::nullopt;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    const double fm = diff(mid);
    if (flo * fm <= 0.0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace trimer
