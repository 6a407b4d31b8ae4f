#include "trimer/stability.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <sstream>

#include "trimer/landscape.hpp"

namespace trimer {

namespace {

using Vec15 = Eigen::Matrix<double, 15, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;

Vec15 state_vec(const SemiclassicalState& s) {
  Vec15 v;
  for (int n = 0; n < n_sites; ++n) {
    v[5 * n + 0] = s.alpha[n].real();
    v[5 * n + 1] = s.alpha[n].imag();
    v[5 * n + 2] = s.sx[n];
    v[5 * n + 3] = s.sy[n];
    v[5 * n + 4] = s.sz[n];
  }
  return v;
}

double state_distance(const SemiclassicalState& a, const SemiclassicalState& b) {
  return (state_vec(a) - state_vec(b)).lpNorm<Eigen::Infinity>();
}

SemiclassicalState apply_ring_reflection(const SemiclassicalState& s) {
  SemiclassicalState out = s;
  std::swap(out.alpha[1], out.alpha[2]);
  std::swap(out.sx[1], out.sx[2]);
  std::swap(out.sy[1], out.sy[2]);
  std::swap(out.sz[1], out.sz[2]);
  return out;
}

// distance modulo the symmetry group of the equations of motion
double orbit_distance(const ModelParams& p, const SemiclassicalState& a,
                      const SemiclassicalState& b) {
  const bool reflective = std::abs(std::sin(p.phi)) < 1e-12;
  double best = std::numeric_limits<double>::infinity();
  SemiclassicalState t = b;
  for (int shift = 0; shift < n_sites; ++shift) {
    for (int refl = 0; refl < (reflective ? 2 : 1); ++refl) {
      const SemiclassicalState u = refl ? apply_ring_reflection(t) : t;
      best = std::min(best, state_distance(a, u));
      best = std::min(best, state_distance(a, apply_parity(u)));
    }
    t = apply_translation(t);
  }
  return best;
}

// orthonormal tangent frame of the spin sphere at one site
struct SpinFrame {
  Eigen::Vector3d e1, e2;
};

SpinFrame frame_at(const Eigen::Vector3d& spin) {
  const Eigen::Vector3d n = spin.normalized();
  const Eigen::Vector3d seed =
      std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  SpinFrame f;
  f.e1 = (seed - seed.dot(n) * n).normalized();
  f.e2 = n.cross(f.e1);
  return f;
}

std::array<SpinFrame, 3> frames_of(const SemiclassicalState& s) {
  std::array<SpinFrame, 3> fr;
  for (int n = 0; n < n_sites; ++n)
    fr[n] = frame_at(Eigen::Vector3d(s.sx[n], s.sy[n], s.sz[n]));
  return fr;
}

// move in the 12-dimensional chart (dRe, dIm, tangent coords) and retract
// the spins back to the sphere
SemiclassicalState retract(const SemiclassicalState& base,
                           const std::array<SpinFrame, 3>& fr, const Vec12& u) {
  SemiclassicalState s = base;
  for (int n = 0; n < n_sites; ++n) {
    s.alpha[n] += cplx(u[4 * n + 0], u[4 * n + 1]);
    Eigen::Vector3d spin(base.sx[n], base.sy[n], base.sz[n]);
    spin += u[4 * n + 2] * fr[n].e1 + u[4 * n + 3] * fr[n].e2;
    spin *= 0.5 / spin.norm();
    s.sx[n] = spin.x();
    s.sy[n] = spin.y();
    s.sz[n] = spin.z();
  }
  return s;
}

// rhs in the chart: cavity components plus the tangential spin components
Vec12 chart_rhs(const ModelParams& p, const SemiclassicalState& base,
                const std::array<SpinFrame, 3>& fr, const Vec12& u) {
  const SemiclassicalState s = retract(base, fr, u);
  const SemiclassicalState d = rhs(p, s);
  Vec12 f;
  for (int n = 0; n < n_sites; ++n) {
    f[4 * n + 0] = d.alpha[n].real();
    f[4 * n + 1] = d.alpha[n].imag();
    const Eigen::Vector3d ds(d.sx[n], d.sy[n], d.sz[n]);
    f[4 * n + 2] = ds.dot(fr[n].e1);
    f[4 * n + 3] = ds.dot(fr[n].e2);
  }
  return f;
}

Eigen::Matrix<double, 12, 12> chart_jacobian_fd(const ModelParams& p,
                                                const SemiclassicalState& s) {
  const auto fr = frames_of(s);
  Eigen::Matrix<double, 12, 12> j;
  const double h = 1e-6;
  for (int col = 0; col < 12; ++col) {
    Vec12 up = Vec12::Zero(), dn = Vec12::Zero();
    up[col] = h;
    dn[col] = -h;
    j.col(col) = (chart_rhs(p, s, fr, up) - chart_rhs(p, s, fr, dn)) / (2.0 * h);
  }
  return j;
}

std::array<cplx, 12> sorted_eigs(const Eigen::Matrix<double, 12, 12>& m) {
  Eigen::EigenSolver<Eigen::Matrix<double, 12, 12>> es(m);
  std::array<cplx, 12> out;
  for (int i = 0; i < 12; ++i) out[i] = es.eigenvalues()[i];
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return out;
}

}  // namespace

EquilibriumClass classify_state(const SemiclassicalState& s) {
  const double az = 1e-7;
  std::array<bool, 3> dark{};
  int zeros = 0;
  double amax = 0.0;
  for (int n = 0; n < n_sites; ++n) {
    dark[n] = std::abs(s.alpha[n]) < az;
    zeros += dark[n];
    amax = std::max(amax, std::abs(s.alpha[n]));
  }
  if (zeros == 3) return EquilibriumClass::normal;
  if (zeros == 2)
    throw std::invalid_argument(
        "two dark cavities never solve the fixed-point equations");
  const double tol = 1e-6 * std::max(1.0, amax);
  if (zeros == 1) {
    int k = 0;
    while (!dark[k]) ++k;
    if (std::abs(s.alpha[site_next(k)] + s.alpha[site_prev(k)]) < tol)
      return EquilibriumClass::mixed;
    throw std::invalid_argument(
        "one dark cavity requires the other two fields opposite");
  }
  const bool equal = std::abs(s.alpha[0] - s.alpha[1]) < tol &&
                     std::abs(s.alpha[1] - s.alpha[2]) < tol;
  return equal ? EquilibriumClass::nfs : EquilibriumClass::fs;
}

namespace {

// spin direction locked to the cavity field as in the closed-system
// equilibria; a good seed manifold for Newton searches
SemiclassicalState spin_locked(const ModelParams& p,
                               const std::array<cplx, 3>& alphas) {
  const auto d = p.derived();
  SemiclassicalState s;
  for (int n = 0; n < n_sites; ++n) {
    s.alpha[n] = alphas[n];
    const double ax = d.eta_plus * alphas[n].real();
    const double ay = d.eta_minus * alphas[n].imag();
    const double omega = std::sqrt(
        p.omega_a * p.omega_a + 16.0 * d.lambda * d.lambda * (ax * ax + ay * ay));
    s.sx[n] = -2.0 * d.lambda * d.eta_plus * alphas[n].real() / omega;
    s.sy[n] = 2.0 * d.lambda * d.eta_minus * alphas[n].imag() / omega;
    s.sz[n] = -0.5 * p.omega_a / omega;
  }
  return s;
}

// single-site steady states shared by the nfs and mixed ansatz reductions:
// the uniform problem with effective cavity frequency omega_tilde
struct SiteSolution {
  cplx alpha;
  double x, y, z;  // the spin
};

std::vector<SiteSolution> site_solutions(const ModelParams& p,
                                         double omega_tilde) {
  std::vector<SiteSolution> out;
  const auto d = p.derived();
  const double lam = d.lambda, ep = d.eta_plus, em = d.eta_minus;
  const double wa = p.omega_a, wt = omega_tilde;
  if (lam == 0.0) return out;

  // Z solves the compatibility condition of the linear cavity equations
  const double a2 = 64.0 * std::pow(lam, 4) * ep * ep * em * em / (wa * wa);
  const double a1 = 8.0 * lam * lam * wt * (ep * ep + em * em) / wa;
  const double a0 = wt * wt + p.kappa * p.kappa;
  std::vector<double> roots;
  if (std::abs(a2) < 1e-14) {
    if (std::abs(a1) > 1e-14) roots.push_back(-a0 / a1);
  } else {
    const double disc = a1 * a1 - 4.0 * a2 * a0;
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      roots.push_back((-a1 - r) / (2.0 * a2));
      roots.push_back((-a1 + r) / (2.0 * a2));
    }
  }
  for (double z : roots) {
    if (!(std::abs(z) < 0.5) || std::abs(z) < 1e-12) continue;
    const double u = wt + 8.0 * lam * lam * em * em * z / wa;
    const double v = wt + 8.0 * lam * lam * ep * ep * z / wa;
    double xh, yh;
    const double dirnorm = std::hypot(u, p.kappa);
    if (dirnorm > 1e-12) {
      xh = u / dirnorm;
      yh = p.kappa / dirnorm;
    } else if (std::abs(v) > 1e-12) {
      xh = 0.0;
      yh = 1.0;
    } else {
      xh = 1.0;
      yh = 0.0;
    }
    const double denom = (16.0 * lam * lam * z * z / (wa * wa)) *
                         (ep * ep * xh * xh + em * em * yh * yh);
    if (denom < 1e-14) continue;
    const double t = std::sqrt((0.25 - z * z) / denom);
    SiteSolution sol;
    sol.alpha = cplx(t * xh, t * yh);
    sol.x = 4.0 * lam * ep * z * (t * xh) / wa;
    sol.y = -4.0 * lam * em * z * (t * yh) / wa;
    sol.z = z;
    out.push_back(sol);
  }
  return out;
}

// map a chart eigenvector back to a full-state displacement
SemiclassicalState displace(const SemiclassicalState& s,
                            const Eigen::Matrix<double, 12, 1>& v, double eps) {
  SemiclassicalState out = s;
  for (int n = 0; n < n_sites; ++n) {
    out.alpha[n] += eps * cplx(v[4 * n + 0], v[4 * n + 1]);
    const double dx = v[4 * n + 2], dy = v[4 * n + 3];
    double dz = 0.0;
    if (std::abs(s.sz[n]) > 1e-10)
      dz = -(s.sx[n] * dx + s.sy[n] * dy) / s.sz[n];
    out.sx[n] += eps * dx;
    out.sy[n] += eps * dy;
    out.sz[n] += eps * dz;
  }
  out.renormalize_spins();
  return out;
}

}  // namespace

std::string to_string(EquilibriumClass cls) {
  switch (cls) {
    case EquilibriumClass::normal: return "n";
    case EquilibriumClass::nfs: return "nfs";
    case EquilibriumClass::fs: return "fs";
    case EquilibriumClass::mixed: return "mix";
  }
  return "?";
}

std::string to_string(BifurcationKind kind) {
  switch (kind) {
    case BifurcationKind::pitchfork_super: return "pitchfork_super";
    case BifurcationKind::pitchfork_sub: return "pitchfork_sub";
    case BifurcationKind::saddle_node: return "saddle_node";
    case BifurcationKind::hopf: return "hopf";
    case BifurcationKind::hopf_anomalous: return "hopf_anomalous";
    case BifurcationKind::stability_flip: return "stability_flip";
    case BifurcationKind::basin_collision: return "basin_collision";
    case BifurcationKind::exterior_crisis: return "exterior_crisis";
  }
  return "?";
}

Jacobian12 jacobian(const ModelParams& p, const SemiclassicalState& s) {
  if (s.spin_norm_error() > 1e-8)
    throw std::invalid_argument("jacobian: spins are off the sphere");
  for (int n = 0; n < n_sites; ++n)
    if (std::abs(s.sz[n]) < 1e-10)
      throw ChartError("jacobian: spin at a pole, the reduced chart divides by Z");

  const auto d = p.derived();
  const double lam = d.lambda, ep = d.eta_plus, em = d.eta_minus;
  const double jc = d.j * std::cos(p.phi), js = d.j * std::sin(p.phi);

  Eigen::Matrix4d hop_next, hop_prev;
  hop_next.setZero();
  hop_prev.setZero();
  hop_next(0, 0) = js;
  hop_next(0, 1) = jc;
  hop_next(1, 0) = -jc;
  hop_next(1, 1) = js;
  hop_prev(0, 0) = -js;
  hop_prev(0, 1) = jc;
  hop_prev(1, 0) = -jc;
  hop_prev(1, 1) = -js;

  Jacobian12 m = Jacobian12::Zero();
  for (int n = 0; n < n_sites; ++n) {
    const double x = s.alpha[n].real(), y = s.alpha[n].imag();
    const double sx = s.sx[n], sy = s.sy[n], sz = s.sz[n];
    Eigen::Matrix4d a;
    a << -p.kappa, p.omega0, 0.0, -2.0 * lam * em,
        -p.omega0, -p.kappa, -2.0 * lam * ep, 0.0,
        0.0, -4.0 * lam * em * sz, 4.0 * lam * em * sx * y / sz,
        4.0 * lam * em * sy * y / sz - p.omega_a,
        -4.0 * lam * ep * sz, 0.0, 4.0 * lam * ep * sx * x / sz + p.omega_a,
        4.0 * lam * ep * sy * x / sz;
    m.block<4, 4>(4 * n, 4 * n) = a;
    m.block<4, 4>(4 * n, 4 * site_next(n)) = hop_next;
    m.block<4, 4>(4 * n, 4 * site_prev(n)) = hop_prev;
  }
  return m;
}

std::array<cplx, 12> stability_eigenvalues(const ModelParams& p,
                                           const SemiclassicalState& s) {
  try {
    return sorted_eigs(jacobian(p, s));
  } catch (const ChartError&) {
    return sorted_eigs(chart_jacobian_fd(p, s));
  }
}

Equilibrium analyze_equilibrium(const ModelParams& p,
                                const SemiclassicalState& s, double rhs_tol) {
  const double r = rhs_norm(p, s);
  if (r > rhs_tol) {
    std::ostringstream os;
    os << "analyze_equilibrium: ||rhs|| = " << r << " exceeds " << rhs_tol;
    throw std::invalid_argument(os.str());
  }
  Equilibrium e;
  e.state = s;
  e.cls = classify_state(s);
  e.jacobian_eigs = stability_eigenvalues(p, s);
  e.stable = e.max_re() < 0.0;
  return e;
}

std::optional<SemiclassicalState> refine_equilibrium(
    const ModelParams& p, const SemiclassicalState& seed, double tol) {
  SemiclassicalState s = seed;
  s.renormalize_spins();
  for (int iter = 0; iter < 80; ++iter) {
    const auto fr = frames_of(s);
    const Vec12 f = chart_rhs(p, s, fr, Vec12::Zero());
    const double fn = f.lpNorm<Eigen::Infinity>();
    if (fn < tol) return s;

    Eigen::Matrix<double, 12, 12> j;
    const double h = 1e-7 * std::max(1.0, state_vec(s).lpNorm<Eigen::Infinity>());
    for (int col = 0; col < 12; ++col) {
      Vec12 up = Vec12::Zero(), dn = Vec12::Zero();
      up[col] = h;
      dn[col] = -h;
      j.col(col) = (chart_rhs(p, s, fr, up) - chart_rhs(p, s, fr, dn)) / (2.0 * h);
    }
    const Vec12 du = j.colPivHouseholderQr().solve(-f);
    if (!du.allFinite()) return std::nullopt;

    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const SemiclassicalState trial = retract(s, fr, step * du);
      if (chart_rhs(p, trial, frames_of(trial), Vec12::Zero())
              .lpNorm<Eigen::Infinity>() < (1.0 - 0.25 * step) * fn) {
        s = trial;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) return std::nullopt;
  }
  return rhs_norm(p, s) < tol ? std::optional<SemiclassicalState>(s) : std::nullopt;
}

std::vector<Equilibrium> find_equilibria(const ModelParams& p,
                                         const FindOptions& opts) {
  p.validate();
  const auto d = p.derived();
  std::vector<SemiclassicalState> candidates;

  if (opts.want_normal) {
    candidates.push_back(normal_state(-1));
    candidates.push_back(normal_state(+1));
  }

  if (opts.want_nfs) {
    const double wt = p.omega0 + 2.0 * d.j * std::cos(p.phi);
    for (const SiteSolution& sol : site_solutions(p, wt)) {
      SemiclassicalState s;
      for (int n = 0; n < n_sites; ++n) {
        s.alpha[n] = sol.alpha;
        s.sx[n] = sol.x;
        s.sy[n] = sol.y;
        s.sz[n] = sol.z;
      }
      candidates.push_back(s);
    }
  }

  if (opts.want_mixed && std::abs(std::sin(p.phi)) < 1e-12) {
    const double wt = p.omega0 - d.j * std::cos(p.phi);
    for (const SiteSolution& sol : site_solutions(p, wt)) {
      for (int pole : {-1, +1}) {
        SemiclassicalState s;
        s.alpha[0] = 0.0;
        s.sx[0] = s.sy[0] = 0.0;
        s.sz[0] = 0.5 * pole;
        s.alpha[1] = sol.alpha;
        s.sx[1] = sol.x;
        s.sy[1] = sol.y;
        s.sz[1] = sol.z;
        s.alpha[2] = -sol.alpha;
        s.sx[2] = -sol.x;
        s.sy[2] = -sol.y;
        s.sz[2] = sol.z;
        candidates.push_back(s);
      }
    }
  }

  if (opts.want_fs) {
    std::vector<SemiclassicalState> seeds;
    {
      // the closed-system ground state, exact at kappa = 0, is a strong seed
      const GroundState gs = minimize_ground_state(p);
      if (gs.phase != Phase::normal)
        seeds.push_back(state_from_fields(p, gs.fields));
    }
    const double a0 = std::max(0.5, 0.5 * p.g);
    for (double a : {a0, 2.0 * a0}) {
      seeds.push_back(spin_locked(p, {cplx(a), cplx(-0.5 * a), cplx(-0.5 * a)}));
      seeds.push_back(spin_locked(p, {cplx(a), cplx(0.3 * a), cplx(0.3 * a)}));
      seeds.push_back(spin_locked(p, {cplx(a), cplx(-a), cplx(0.2 * a)}));
      seeds.push_back(spin_locked(p, {cplx(a), cplx(a), cplx(-0.5 * a)}));
    }
    for (int k = 0; k < opts.random_seeds; ++k)
      seeds.push_back(random_state(std::max(1.0, p.g), opts.rng_seed + k));
    for (const auto& seed : seeds)
      if (auto s = refine_equilibrium(p, seed)) candidates.push_back(*s);
  }

  std::vector<Equilibrium> out;
  for (auto& c : candidates) {
    if (rhs_norm(p, c) > 1e-10) {
      // the closed forms are exact to roundoff, so this only polishes
      // Newton leftovers
      auto polished = refine_equilibrium(p, c);
      if (!polished || rhs_norm(p, *polished) > 1e-10) continue;
      c = *polished;
    }
    Equilibrium e;
    try {
      e = analyze_equilibrium(p, c);
    } catch (const std::invalid_argument&) {
      continue;  // off-taxonomy Newton landing, drop it
    }
    const bool wanted = (e.cls == EquilibriumClass::normal && opts.want_normal) ||
                        (e.cls == EquilibriumClass::nfs && opts.want_nfs) ||
                        (e.cls == EquilibriumClass::fs && opts.want_fs) ||
                        (e.cls == EquilibriumClass::mixed && opts.want_mixed);
    if (!wanted) continue;
    // dark states with spins at mismatched poles solve the flow too, but
    // fall outside the n class (uniform poles); drop them
    if (e.cls == EquilibriumClass::normal &&
        (std::abs(e.state.sz[0] - e.state.sz[1]) > 1e-9 ||
         std::abs(e.state.sz[1] - e.state.sz[2]) > 1e-9))
      continue;
    bool dup = false;
    for (const auto& prev : out)
      if (prev.cls == e.cls && orbit_distance(p, prev.state, e.state) < 1e-6)
        dup = true;
    if (!dup) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [&](const Equilibrium& a, const Equilibrium& b) {
    if (a.cls != b.cls) return static_cast<int>(a.cls) < static_cast<int>(b.cls);
    const double ea = mean_field_energy(p, a.state);
    const double eb = mean_field_energy(p, b.state);
    if (std::abs(ea - eb) > 1e-9) return ea < eb;
    return state_vec(a.state).sum() > state_vec(b.state).sum();
  });
  return out;
}

namespace {

// greedy continuity pairing: perm[i] = index in `next` matched to prev[i]
std::array<int, 12> match_eigs(const std::array<cplx, 12>& prev,
                               const std::array<cplx, 12>& next) {
  std::array<int, 12> perm{};
  std::array<bool, 12> used{};
  for (int i = 0; i < 12; ++i) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 12; ++j) {
      if (used[j]) continue;
      const double dd = std::abs(prev[i] - next[j]);
      if (dd < bd) {
        bd = dd;
        best = j;
      }
    }
    perm[i] = best;
    used[best] = true;
  }
  return perm;
}

struct SolveResult {
  SemiclassicalState state;
  Equilibrium eq;
};

std::optional<SolveResult> solve_on_branch(const ModelParams& p,
                                           const SemiclassicalState& seed,
                                           EquilibriumClass cls) {
  auto s = refine_equilibrium(p, seed);
  if (!s) return std::nullopt;
  Equilibrium e;
  try {
    e = analyze_equilibrium(p, *s);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  if (e.cls != cls) return std::nullopt;
  return SolveResult{*s, e};
}

// full-state direction of one chart eigenvector (real part), normalized
Eigen::Matrix<double, 12, 1> eig_direction(const ModelParams& p,
                                           const SemiclassicalState& s,
                                           const cplx& lambda) {
  Eigen::Matrix<double, 12, 12> m;
  try {
    m = jacobian(p, s);
  } catch (const ChartError&) {
    m = chart_jacobian_fd(p, s);
  }
  Eigen::EigenSolver<Eigen::Matrix<double, 12, 12>> es(m);
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 12; ++i) {
    const double dd = std::abs(es.eigenvalues()[i] - lambda);
    if (dd < bd) {
      bd = dd;
      best = i;
    }
  }
  Eigen::Matrix<double, 12, 1> v = es.eigenvectors().col(best).real();
  const double nrm = v.norm();
  if (nrm < 1e-12) v = es.eigenvectors().col(best).imag();
  return v.normalized();
}

// chart directions spanning the (possibly degenerate) crossing eigenspace,
// plus diagonal combinations that reach all branches forking inside it
std::vector<Eigen::Matrix<double, 12, 1>> crossing_directions(
    const ModelParams& p, const SemiclassicalState& s, const cplx& lambda) {
  Eigen::Matrix<double, 12, 12> m;
  try {
    m = jacobian(p, s);
  } catch (const ChartError&) {
    m = chart_jacobian_fd(p, s);
  }
  Eigen::EigenSolver<Eigen::Matrix<double, 12, 12>> es(m);
  std::vector<Eigen::Matrix<double, 12, 1>> basis;
  for (int i = 0; i < 12; ++i) {
    if (std::abs(es.eigenvalues()[i] - lambda) > 1e-3) continue;
    Eigen::Matrix<double, 12, 1> v = es.eigenvectors().col(i).real();
    if (v.norm() < 1e-12) v = es.eigenvectors().col(i).imag();
    v.normalize();
    bool redundant = false;
    for (const auto& b : basis)
      redundant = redundant || std::abs(b.dot(v)) > 1.0 - 1e-8;
    if (!redundant) basis.push_back(v);
  }
  std::vector<Eigen::Matrix<double, 12, 1>> out = basis;
  for (size_t i = 0; i < basis.size(); ++i)
    for (size_t j = i + 1; j < basis.size(); ++j) {
      out.push_back((basis[i] + basis[j]).normalized());
      out.push_back((basis[i] - basis[j]).normalized());
    }
  return out;
}

}  // namespace

Branch branch_continuation(ModelParams p, double g_from, double g_to,
                           const SemiclassicalState& seed,
                           const ContinuationOptions& opts) {
  p.validate();
  const double range = std::abs(g_to - g_from);
  if (range <= 0.0)
    throw std::invalid_argument("branch_continuation: empty g range");
  const double dir = g_to > g_from ? 1.0 : -1.0;
  const double h0 = opts.step > 0.0 ? opts.step : range / 400.0;

  p.g = g_from;
  auto first = refine_equilibrium(p, seed);
  if (!first)
    throw std::invalid_argument("branch_continuation: seed did not converge");

  Branch out;
  out.cls = classify_state(*first);
  out.points.push_back({g_from, analyze_equilibrium(p, *first)});
  out.g_last = g_from;

  auto record_event = [&](BifurcationKind kind, EquilibriumClass bcls, double g,
                          const std::string& sig, double osc) {
    BifurcationEvent ev;
    ev.kind = kind;
    ev.branch_class = bcls;
    ev.g = g;
    ev.eta = p.eta;
    ev.phi = p.phi;
    ev.kappa = p.kappa;
    ev.eigen_signature = sig;
    ev.osc_frequency = osc;
    out.events.push_back(ev);
  };

  // classification of a refined crossing: zero pair, conjugate pair, or a
  // single real eigenvalue
  auto classify_crossing = [&](double g_star, const SolveResult& at,
                               const cplx& lam_cross) {
    std::array<cplx, 12> eigs = at.eq.jacobian_eigs;
    std::sort(eigs.begin(), eigs.end(),
              [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    const bool zero_pair = std::abs(eigs[0]) < 1e-4 && std::abs(eigs[1]) < 1e-4 &&
                           std::abs(eigs[0].imag()) < 1e-4 &&
                           std::abs(eigs[1].imag()) < 1e-4;
    ModelParams pl = p;
    const double omega = std::abs(lam_cross.imag());
    if (omega > 1e-4 && omega < 1e-2) {
      // a conjugate pair this slow may be collapsing onto the real axis, the
      // collision point sits just beyond the Re = 0 refinement; scan for it
      for (double dg : {1e-8, 1e-7, 1e-6, 1e-5, 1e-4}) {
        pl.g = g_star + dir * dg * std::max(1.0, range);
        const auto probe = solve_on_branch(pl, at.state, out.cls);
        if (!probe) break;
        std::array<cplx, 12> pe = probe->eq.jacobian_eigs;
        std::sort(pe.begin(), pe.end(),
                  [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
        if (std::abs(pe[0]) < 1e-4 && std::abs(pe[1]) < 1e-4 &&
            std::abs(pe[0].imag()) < 1e-4 && std::abs(pe[1].imag()) < 1e-4) {
          record_event(BifurcationKind::hopf_anomalous, out.cls, pl.g,
                       "conjugate pair collides at zero on the real axis", 0.0);
          return;
        }
      }
    }
    if (omega > 1e-4) {
      // conjugate pair: a Hopf candidate, confirmed by an actual oscillation
      double osc_seen = 0.0;
      if (opts.verify_oscillation) {
        const double probe = std::max(2.0 * h0, 1e-3 * range);
        // probe the side where the pair destabilizes; the branch was swept
        // from g_from, so destabilization lies toward g_to
        pl.g = g_star + dir * probe;
        if (auto ps = solve_on_branch(pl, at.state, out.cls)) {
          const auto v = eig_direction(pl, ps->state, lam_cross);
          SemiclassicalState kicked = displace(ps->state, v, 1e-3);
          ClassifyOptions copt;
          copt.t_transient = 800.0;
          copt.t_measure = 1500.0;
          const AttractorReport rep = classify_attractor(pl, kicked, copt);
          if (rep.kind == AttractorKind::periodic && rep.period)
            osc_seen = 2.0 * M_PI / *rep.period;
          else if (rep.kind == AttractorKind::quasiperiodic ||
                   rep.kind == AttractorKind::chaotic)
            osc_seen = omega;
        }
        if (osc_seen > 0.0) {
          std::ostringstream os;
          os << "conjugate pair crossed at +-i" << omega
             << ", oscillation observed";
          record_event(BifurcationKind::hopf, out.cls, g_star, os.str(), omega);
        } else {
          std::ostringstream os;
          os << "conjugate pair crossed at +-i" << omega
             << ", no oscillation found nearby";
          record_event(BifurcationKind::stability_flip, out.cls, g_star,
                       os.str(), 0.0);
        }
      } else {
        std::ostringstream os;
        os << "conjugate pair crossed at +-i" << omega
           << ", oscillation not verified";
        record_event(BifurcationKind::stability_flip, out.cls, g_star, os.str(),
                     0.0);
      }
      return;
    }
    // single real crossing: look for parity-partner branches forking off;
    // the eigenspace can be degenerate (simultaneous k = +-1 ring modes),
    // so probe several directions in it and let a stable pair win
    const auto dirs = crossing_directions(p, at.state, lam_cross);
    const double probe = std::max(2.0 * h0, 1e-3 * range);
    std::optional<Equilibrium> unstable_pair;
    for (double side : {dir, -dir}) {
      pl.g = g_star + side * probe;
      for (const auto& v : dirs) {
        for (double eps : {0.02, 0.1, 0.3}) {
          auto plus = refine_equilibrium(pl, displace(at.state, v, eps));
          auto minus = refine_equilibrium(pl, displace(at.state, v, -eps));
          if (!plus || !minus) continue;
          if (state_distance(*plus, at.state) < 1e-5 ||
              state_distance(*minus, at.state) < 1e-5)
            continue;  // fell back onto the parent branch
          if (state_distance(apply_parity(*plus), *minus) > 1e-6) continue;
          Equilibrium ep;
          try {
            ep = analyze_equilibrium(pl, *plus);
          } catch (const std::invalid_argument&) {
            continue;
          }
          if (ep.stable) {
            std::ostringstream os;
            os << "real eigenvalue crossed, stable parity partners of class "
               << to_string(ep.cls) << " emerge";
            record_event(BifurcationKind::pitchfork_super, ep.cls, g_star,
                         os.str(), 0.0);
            return;
          }
          if (!unstable_pair) unstable_pair = ep;
        }
      }
    }
    if (unstable_pair) {
      std::ostringstream os;
      os << "real eigenvalue crossed, unstable parity partners of class "
         << to_string(unstable_pair->cls) << " emerge";
      record_event(BifurcationKind::pitchfork_sub, unstable_pair->cls, g_star,
                   os.str(), 0.0);
      return;
    }
    // degenerate pitchforks also bring a pair of zeros, so this label only
    // applies once the probe above found no forking branches
    if (zero_pair) {
      record_event(BifurcationKind::hopf_anomalous, out.cls, g_star,
                   "pair of zero eigenvalues at the crossing, no emergent "
                   "branches",
                   0.0);
      return;
    }
    record_event(BifurcationKind::stability_flip, out.cls, g_star,
                 "single real eigenvalue crossed, no emergent branches found",
                 0.0);
  };

  double g = g_from;
  double h = h0;
  SolveResult cur{*first, out.points.back().eq};
  while (std::abs(g_to - g) > 1e-12) {
    double h_try = std::min(h, std::abs(g_to - g));
    std::optional<SolveResult> next;
    while (true) {
      p.g = g + dir * h_try;
      next = solve_on_branch(p, cur.state, out.cls);
      if (next &&
          state_distance(next->state, cur.state) <
              0.5 * (1.0 + state_vec(cur.state).lpNorm<Eigen::Infinity>()))
        break;
      next.reset();
      h_try *= 0.5;
      if (h_try < opts.min_step) break;
    }
    if (!next) {
      out.lost = true;
      // a fold leaves a near-zero real eigenvalue on the last point
      std::array<cplx, 12> eigs = cur.eq.jacobian_eigs;
      std::sort(eigs.begin(), eigs.end(),
                [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
      if (std::abs(eigs[0].imag()) < 1e-4 && std::abs(eigs[0].real()) < 1e-2)
        record_event(BifurcationKind::saddle_node, out.cls, g,
                     "real eigenvalue reaches zero where the branch folds", 0.0);
      break;
    }

    const double g_next = g + dir * h_try;
    const auto perm = match_eigs(cur.eq.jacobian_eigs, next->eq.jacobian_eigs);
    // one event per crossing pair: pick the tracked index with the largest
    // |Re| swing among those that changed sign
    int crossed = -1;
    double swing = 0.0;
    for (int i = 0; i < 12; ++i) {
      const double r0 = cur.eq.jacobian_eigs[i].real();
      const double r1 = next->eq.jacobian_eigs[perm[i]].real();
      if (r0 == 0.0 || r1 == 0.0 || (r0 < 0.0) == (r1 < 0.0)) continue;
      if (std::abs(r1 - r0) > swing) {
        swing = std::abs(r1 - r0);
        crossed = i;
      }
    }
    if (crossed >= 0) {
      // bisect to the crossing of the tracked eigenvalue
      double ga = g, gb = g_next;
      SolveResult sa = cur;
      cplx la = cur.eq.jacobian_eigs[crossed];
      for (int it = 0; it < 60; ++it) {
        const double gm = 0.5 * (ga + gb);
        p.g = gm;
        auto mid = solve_on_branch(p, sa.state, out.cls);
        if (!mid) break;
        const auto pm = match_eigs(sa.eq.jacobian_eigs, mid->eq.jacobian_eigs);
        const auto nearest = std::min_element(
            sa.eq.jacobian_eigs.begin(), sa.eq.jacobian_eigs.end(),
            [&](cplx aa, cplx bb) { return std::abs(aa - la) < std::abs(bb - la); });
        const int tracked =
            pm[std::distance(sa.eq.jacobian_eigs.begin(), nearest)];
        const cplx lm = mid->eq.jacobian_eigs[tracked];
        if ((lm.real() < 0.0) == (la.real() < 0.0)) {
          ga = gm;
          sa = *mid;
          la = lm;
        } else {
          gb = gm;
        }
        if (std::abs(lm.real()) < opts.flip_tol || gb - ga < 1e-11) {
          sa = *mid;
          ga = gm;
          la = lm;
          break;
        }
      }
      classify_crossing(ga, sa, la);
    }

    out.points.push_back({g_next, next->eq});
    out.g_last = g_next;
    cur = *next;
    g = g_next;
    h = std::min(h * 1.5, h0);
  }
  return out;
}

BoundaryDiagram boundary_trace(ModelParams p, double eta_lo, double eta_hi,
                               double g_lo, double g_hi,
                               const BoundaryOptions& opts) {
  if (!(g_hi > g_lo) || opts.n_eta < 2)
    throw std::invalid_argument("boundary_trace: bad grid");

  std::vector<BifurcationEvent> events;
  for (int k = 0; k < opts.n_eta; ++k) {
    p.eta = eta_lo + (eta_hi - eta_lo) * k / (opts.n_eta - 1);

    // branch seeds: every distinct equilibrium orbit at a few g probes
    std::vector<std::pair<double, Equilibrium>> seeds;
    for (double frac : {0.35, 0.7, 0.95}) {
      ModelParams pp = p;
      pp.g = g_lo + frac * (g_hi - g_lo);
      for (const auto& e : find_equilibria(pp)) {
        bool known = false;
        for (const auto& [gs, es] : seeds)
          if (es.cls == e.cls &&
              (e.cls != EquilibriumClass::fs ||
               orbit_distance(pp, es.state, e.state) < 1e-3))
            known = true;
        if (!known) seeds.emplace_back(pp.g, e);
      }
    }
    for (const auto& [g_seed, eq] : seeds) {
      for (double g_end : {g_hi, g_lo}) {
        if (std::abs(g_end - g_seed) < 1e-9) continue;
        try {
          Branch br = branch_continuation(
              [&] {
                ModelParams pp = p;
                pp.g = g_seed;
                return pp;
              }(),
              g_seed, g_end, eq.state, opts.continuation);
          for (auto& ev : br.events) events.push_back(ev);
        } catch (const std::invalid_argument&) {
          // seed failed to converge on this line, skip the branch
        }
      }
    }
  }

  // deduplicate events found from both sweep directions
  std::vector<BifurcationEvent> unique_events;
  for (const auto& ev : events) {
    bool dup = false;
    for (const auto& u : unique_events)
      dup = dup || (u.kind == ev.kind && u.branch_class == ev.branch_class &&
                    std::abs(u.eta - ev.eta) < 1e-12 &&
                    std::abs(u.g - ev.g) < 1e-4 * (g_hi - g_lo));
    if (!dup) unique_events.push_back(ev);
  }

  // link events of equal kind and class across neighboring eta lines
  BoundaryDiagram diagram;
  const double link_tol = 0.08 * (g_hi - g_lo);
  std::vector<bool> taken(unique_events.size(), false);
  std::stable_sort(unique_events.begin(), unique_events.end(),
                   [](const BifurcationEvent& a, const BifurcationEvent& b) {
                     if (a.eta != b.eta) return a.eta < b.eta;
                     return a.g < b.g;
                   });
  for (size_t i = 0; i < unique_events.size(); ++i) {
    if (taken[i]) continue;
    BoundaryCurve curve;
    curve.kind = unique_events[i].kind;
    curve.branch_class = unique_events[i].branch_class;
    curve.points.push_back({unique_events[i].g, unique_events[i].eta});
    taken[i] = true;
    size_t cur = i;
    bool grew = true;
    while (grew) {
      grew = false;
      double bd = link_tol;
      size_t best = 0;
      for (size_t j = 0; j < unique_events.size(); ++j) {
        if (taken[j] || unique_events[j].kind != curve.kind ||
            unique_events[j].branch_class != curve.branch_class)
          continue;
        if (unique_events[j].eta <= unique_events[cur].eta + 1e-15) continue;
        const double dg = std::abs(unique_events[j].g - unique_events[cur].g);
        if (dg < bd) {
          bd = dg;
          best = j;
          grew = true;
        }
      }
      if (grew) {
        taken[best] = true;
        curve.points.push_back({unique_events[best].g, unique_events[best].eta});
        cur = best;
      }
    }
    if (curve.points.size() >= 2)
      diagram.curves.push_back(curve);
    else
      diagram.fragments.push_back(unique_events[i]);
  }
  return diagram;
}

CollisionProbe detect_basin_collision(const ModelParams& p,
                                      const Trajectory& orbit_below,
                                      AttractorKind pre_kind, double t_max) {
  CollisionProbe probe;
  if (!orbit_below.uniform_sampling || orbit_below.states.size() < 16)
    throw std::invalid_argument(
        "detect_basin_collision: needs a uniformly sampled reference orbit");

  // reference cloud of the old attractor
  const size_t stride = std::max<size_t>(1, orbit_below.states.size() / 1000);
  Eigen::MatrixXd cloud(15, 0);
  {
    std::vector<Vec15> cols;
    for (size_t i = 0; i < orbit_below.states.size(); i += stride)
      cols.push_back(state_vec(orbit_below.states[i]));
    cloud.resize(15, static_cast<Eigen::Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i)
      cloud.col(static_cast<Eigen::Index>(i)) = cols[i];
  }
  double extent = 0.0;
  for (int r = 0; r < 15; ++r)
    extent = std::max(extent, cloud.row(r).maxCoeff() - cloud.row(r).minCoeff());
  if (extent < 1e-9)
    throw std::invalid_argument(
        "detect_basin_collision: reference orbit does not oscillate");
  const double ghost_tol = 0.25 * extent;

  auto min_dist = [&](const SemiclassicalState& s) {
    return (cloud.colwise() - state_vec(s)).colwise().lpNorm<Eigen::Infinity>().minCoeff();
  };

  const size_t quarter = orbit_below.states.size() / 4;
  double linger_sum = 0.0;
  int settled = 0, alive = 0;
  std::string absorber_name;
  for (int k = 0; k < 4; ++k) {
    IntegrateOptions opts;
    opts.tol = 1e-9;
    opts.sample_dt = 0.5;
    const Trajectory traj =
        integrate(p, orbit_below.states[k * quarter], t_max, opts);

    double leave_time = t_max;
    for (size_t i = traj.states.size(); i-- > 0;) {
      if (min_dist(traj.states[i]) < ghost_tol) {
        leave_time = traj.times[i];
        break;
      }
    }
    // tail variation tells equilibrium from surviving oscillation
    const size_t tail = traj.states.size() - traj.states.size() / 5;
    double var = 0.0;
    for (size_t i = tail; i < traj.states.size(); ++i)
      var = std::max(var, (state_vec(traj.states[i]) -
                           state_vec(traj.states.back()))
                              .lpNorm<Eigen::Infinity>());
    if (var < 1e-6 && min_dist(traj.states.back()) > ghost_tol) {
      ++settled;
      linger_sum += leave_time;
      try {
        absorber_name = to_string(classify_state(traj.states.back()));
        probe.absorber = classify_state(traj.states.back());
        probe.absorber_found = true;
      } catch (const std::invalid_argument&) {
      }
    } else if (min_dist(traj.states.back()) < ghost_tol || var > 1e-6) {
      ++alive;
    }
  }

  if (settled == 4) {
    probe.collided = true;
    probe.linger_time = linger_sum / 4.0;
    probe.event.kind = pre_kind == AttractorKind::chaotic
                           ? BifurcationKind::exterior_crisis
                           : BifurcationKind::basin_collision;
    probe.event.branch_class = probe.absorber;
    probe.event.g = p.g;
    probe.event.eta = p.eta;
    probe.event.phi = p.phi;
    probe.event.kappa = p.kappa;
    std::ostringstream os;
    os << "attractor gone, trajectories linger near the ghost for "
       << probe.linger_time << " before settling"
       << (probe.absorber_found ? " onto " + absorber_name : "");
    probe.event.eigen_signature = os.str();
  } else {
    std::ostringstream os;
    os << settled << "/4 restarts settled, " << alive << "/4 still oscillating";
    probe.diagnostics = os.str();
  }
  return probe;
}

}  // namespace trimer
