#include "trimer/fluctuations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "trimer/dynamics.hpp"

namespace trimer {

namespace {

constexpr std::array<int, 10> family_offset{0, 6, 12, 21, 27, 33, 42, 51, 60, 69};
constexpr std::array<bool, 10> family_symmetric{true,  true,  false, true, true,
                                                false, false, false, false, false};

// ---- a tiny normally ordered boson algebra on six modes ------------------
// Modes 0..2 are the cavity operators a_n, modes 3..5 the spin bosons b_n.
// A monomial is a product of daggered operators followed by plain ones, each
// group sorted by mode; a polynomial maps monomials to coefficients. This is
// all the machinery needed to turn commutators with a quadratic Hamiltonian
// into matrix rows.

struct Mono {
  std::vector<int> dag, pl;

  bool operator<(const Mono& o) const {
    if (dag != o.dag) return dag < o.dag;
    return pl < o.pl;
  }
};

using Poly = std::map<Mono, cplx>;

void add_term(Poly& p, Mono m, cplx c) {
  auto [it, fresh] = p.try_emplace(std::move(m), c);
  if (!fresh) it->second += c;
}

// Normal-order the product (plain string) x (dagger string), accumulating
// coefficient * result into out. Peels plain operators off the right end:
// a_x (prod d^dag) = sum of single contractions + (prod d^dag) a_x.
void reorder(std::vector<int> pl, std::vector<int> dag, cplx coeff, Poly& out) {
  if (pl.empty() || dag.empty()) {
    std::sort(dag.begin(), dag.end());
    std::sort(pl.begin(), pl.end());
    add_term(out, Mono{std::move(dag), std::move(pl)}, coeff);
    return;
  }
  const int x = pl.back();
  std::vector<int> rest(pl.begin(), pl.end() - 1);
  for (std::size_t j = 0; j < dag.size(); ++j) {
    if (dag[j] != x) continue;
    std::vector<int> shorter = dag;
    shorter.erase(shorter.begin() + static_cast<std::ptrdiff_t>(j));
    reorder(rest, std::move(shorter), coeff, out);
  }
  Poly tail;
  reorder(std::move(rest), std::move(dag), coeff, tail);
  for (auto& [m, c] : tail) {
    Mono grown = m;
    grown.pl.push_back(x);
    std::sort(grown.pl.begin(), grown.pl.end());
    add_term(out, std::move(grown), c);
  }
}

Poly mul(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ma, ca] : a)
    for (const auto& [mb, cb] : b) {
      const cplx c = ca * cb;
      Poly mid;
      reorder(ma.pl, mb.dag, c, mid);
      for (auto& [mm, cm] : mid) {
        Mono full;
        full.dag = ma.dag;
        full.dag.insert(full.dag.end(), mm.dag.begin(), mm.dag.end());
        full.pl = mm.pl;
        full.pl.insert(full.pl.end(), mb.pl.begin(), mb.pl.end());
        std::sort(full.dag.begin(), full.dag.end());
        std::sort(full.pl.begin(), full.pl.end());
        add_term(out, std::move(full), cm);
      }
    }
  return out;
}

Poly commutator(const Poly& a, const Poly& b) {
  Poly out = mul(a, b);
  for (const auto& [m, c] : mul(b, a)) add_term(out, m, -c);
  return out;
}

Poly scaled(Poly p, cplx c) {
  for (auto& [m, v] : p) v *= c;
  return p;
}

Poly added(Poly a, const Poly& b) {
  for (const auto& [m, c] : b) add_term(a, m, c);
  return a;
}

Poly op_a(int n) { return {{Mono{{}, {n}}, cplx(1.0)}}; }
Poly op_ad(int n) { return {{Mono{{n}, {}}, cplx(1.0)}}; }
Poly op_b(int n) { return {{Mono{{}, {n_sites + n}}, cplx(1.0)}}; }
Poly op_bd(int n) { return {{Mono{{n_sites + n}, {}}, cplx(1.0)}}; }

Mono canonical_mono(MomentFamily fam, int n, int m) {
  const int bn = n_sites + n, bm = n_sites + m;
  switch (fam) {
    case MomentFamily::aa: return Mono{{}, {n, m}};
    case MomentFamily::adad: return Mono{{n, m}, {}};
    case MomentFamily::ada: return Mono{{n}, {m}};
    case MomentFamily::bb: return Mono{{}, {bn, bm}};
    case MomentFamily::bdbd: return Mono{{bn, bm}, {}};
    case MomentFamily::bdb: return Mono{{bn}, {bm}};
    case MomentFamily::ab: return Mono{{}, {n, bm}};
    case MomentFamily::adbd: return Mono{{n, bm}, {}};
    case MomentFamily::adb: return Mono{{n}, {bm}};
    case MomentFamily::bda: return Mono{{bn}, {m}};
  }
  throw std::logic_error("unreachable moment family");
}

struct MomentTables {
  std::array<Mono, n_moments> mono{};
  std::map<Mono, int> index;
  std::array<int, n_moments> conj{};
};

const MomentTables& tables() {
  static const MomentTables t = [] {
    MomentTables out;
    for (int f = 0; f < 10; ++f) {
      const auto fam = static_cast<MomentFamily>(f);
      for (int n = 0; n < n_sites; ++n)
        for (int m = (family_symmetric[static_cast<std::size_t>(f)] ? n : 0);
             m < n_sites; ++m) {
          const int idx = moment_index(fam, n, m);
          out.mono[static_cast<std::size_t>(idx)] = canonical_mono(fam, n, m);
          out.index.emplace(out.mono[static_cast<std::size_t>(idx)], idx);
        }
    }
    auto pair_up = [&out](MomentFamily fa, int n, int m, MomentFamily fb,
                          int nb, int mb) {
      out.conj[static_cast<std::size_t>(moment_index(fa, n, m))] =
          moment_index(fb, nb, mb);
    };
    for (int n = 0; n < n_sites; ++n)
      for (int m = 0; m < n_sites; ++m) {
        pair_up(MomentFamily::aa, n, m, MomentFamily::adad, n, m);
        pair_up(MomentFamily::adad, n, m, MomentFamily::aa, n, m);
        pair_up(MomentFamily::bb, n, m, MomentFamily::bdbd, n, m);
        pair_up(MomentFamily::bdbd, n, m, MomentFamily::bb, n, m);
        pair_up(MomentFamily::ada, n, m, MomentFamily::ada, m, n);
        pair_up(MomentFamily::bdb, n, m, MomentFamily::bdb, m, n);
        pair_up(MomentFamily::ab, n, m, MomentFamily::adbd, n, m);
        pair_up(MomentFamily::adbd, n, m, MomentFamily::ab, n, m);
        pair_up(MomentFamily::adb, n, m, MomentFamily::bda, m, n);
        pair_up(MomentFamily::bda, n, m, MomentFamily::adb, m, n);
      }
    return out;
  }();
  return t;
}

Poly hamiltonian(const ModelParams& p, const CouplingCoefficients& cc) {
  const auto d = p.derived();
  const cplx hop = d.j * std::exp(cplx(0.0, p.phi));
  Poly h;
  for (int n = 0; n < n_sites; ++n) {
    add_term(h, Mono{{n}, {n}}, p.omega0);
    add_term(h, Mono{{n_sites + n}, {n_sites + n}}, cc.spin_freq[n]);
    const Poly a_plus = added(op_a(n), op_ad(n));
    const Poly a_minus = added(op_a(n), scaled(op_ad(n), -1.0));
    const Poly b_plus = added(op_b(n), op_bd(n));
    const Poly b_minus = added(op_b(n), scaled(op_bd(n), -1.0));
    h = added(std::move(h), scaled(mul(a_plus, b_plus), cc.lam_pp[n]));
    h = added(std::move(h), scaled(mul(a_plus, b_minus), cc.lam_pm[n]));
    h = added(std::move(h), scaled(mul(a_minus, b_plus), cc.lam_mp[n]));
    h = added(std::move(h), scaled(mul(a_minus, b_minus), cc.lam_mm[n]));
    const int nn = site_next(n);
    add_term(h, Mono{{n}, {nn}}, hop);
    add_term(h, Mono{{nn}, {n}}, std::conj(hop));
  }
  return h;
}

double field_distance(const SemiclassicalState& a, const SemiclassicalState& b) {
  double acc = 0.0;
  for (int n = 0; n < n_sites; ++n) {
    acc += std::norm(a.alpha[n] - b.alpha[n]);
    acc += (a.sx[n] - b.sx[n]) * (a.sx[n] - b.sx[n]);
    acc += (a.sy[n] - b.sy[n]) * (a.sy[n] - b.sy[n]);
    acc += (a.sz[n] - b.sz[n]) * (a.sz[n] - b.sz[n]);
  }
  return std::sqrt(acc);
}

// distance modulo the symmetry group (translations and parity)
double orbit_distance(const SemiclassicalState& a, const SemiclassicalState& b) {
  double best = std::numeric_limits<double>::infinity();
  SemiclassicalState t = b;
  for (int k = 0; k < n_sites; ++k) {
    best = std::min(best, field_distance(a, t));
    best = std::min(best, field_distance(a, apply_parity(t)));
    t = apply_translation(t);
  }
  return best;
}

}  // namespace

int moment_index(MomentFamily fam, int n, int m) {
  if (n < 0 || n >= n_sites || m < 0 || m >= n_sites)
    throw std::out_of_range("moment_index: site out of range");
  const auto f = static_cast<std::size_t>(fam);
  if (family_symmetric[f]) {
    if (n > m) std::swap(n, m);
    return family_offset[f] + 3 * n - n * (n + 1) / 2 + m;
  }
  return family_offset[f] + 3 * n + m;
}

int conjugate_index(int idx) {
  if (idx < 0 || idx >= n_moments)
    throw std::out_of_range("conjugate_index: index out of range");
  return tables().conj[static_cast<std::size_t>(idx)];
}

cplx SecondMoments::get(MomentFamily fam, int n, int m) const {
  return values(moment_index(fam, n, m));
}

std::array<double, n_sites> SecondMoments::photon_numbers() const {
  std::array<double, n_sites> out{};
  for (int n = 0; n < n_sites; ++n)
    out[static_cast<std::size_t>(n)] = get(MomentFamily::ada, n, n).real();
  return out;
}

double SecondMoments::hermiticity_error() const {
  double worst = 0.0;
  for (int i = 0; i < n_moments; ++i)
    worst = std::max(worst,
                     std::abs(values(i) - std::conj(values(conjugate_index(i)))));
  return worst;
}

double SecondMoments::min_photon_eigenvalue() const {
  Eigen::Matrix3cd gram;
  for (int n = 0; n < n_sites; ++n)
    for (int m = 0; m < n_sites; ++m)
      gram(n, m) = get(MomentFamily::ada, n, m);
  gram = 0.5 * (gram + gram.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(gram);
  return es.eigenvalues().minCoeff();
}

CouplingCoefficients coupling_coefficients(const ModelParams& p,
                                           const SemiclassicalState& s) {
  const auto d = p.derived();
  CouplingCoefficients cc;
  for (int n = 0; n < n_sites; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const double cos_t = -2.0 * s.sz[i];
    if (cos_t <= 1e-9)
      throw std::invalid_argument(
          "coupling_coefficients: spin points into the upper hemisphere, no "
          "stable rotated frame exists");
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    double cos_p = 1.0, sin_p = 0.0;
    if (sin_t > 1e-9) {
      cos_p = -2.0 * s.sx[i] / sin_t;
      sin_p = -2.0 * s.sy[i] / sin_t;
      const double r = std::hypot(cos_p, sin_p);
      cos_p /= r;
      sin_p /= r;
    }
    cc.lam_pp[i] = d.lambda * d.eta_plus * cos_t * cos_p;
    cc.lam_pm[i] = cplx(0.0, -d.lambda * d.eta_plus * sin_p);
    cc.lam_mp[i] = cplx(0.0, d.lambda * d.eta_minus * cos_t * sin_p);
    cc.lam_mm[i] = -d.lambda * d.eta_minus * cos_p;
    cc.spin_freq[i] = p.omega_a / cos_t;
  }
  return cc;
}

MomentSystem assemble_moment_system(const ModelParams& p, const Equilibrium& e) {
  p.validate();
  if (e.max_re() > 1e-9)
    throw std::invalid_argument(
        "assemble_moment_system: the equilibrium is linearly unstable");
  const CouplingCoefficients cc = coupling_coefficients(p, e.state);
  const Poly h = hamiltonian(p, cc);

  MomentSystem sys;
  sys.M = Eigen::MatrixXcd::Zero(n_moments, n_moments);
  sys.v = Eigen::VectorXcd::Zero(n_moments);

  for (int row = 0; row < n_moments; ++row) {
    const Poly obs{{tables().mono[static_cast<std::size_t>(row)], cplx(1.0)}};
    Poly rhs = scaled(commutator(h, obs), cplx(0.0, 1.0));
    if (p.kappa != 0.0) {
      for (int n = 0; n < n_sites; ++n) {
        const Poly num{{Mono{{n}, {n}}, cplx(1.0)}};
        rhs = added(std::move(rhs),
                    scaled(mul(mul(op_ad(n), obs), op_a(n)), 2.0 * p.kappa));
        rhs = added(std::move(rhs), scaled(mul(num, obs), -p.kappa));
        rhs = added(std::move(rhs), scaled(mul(obs, num), -p.kappa));
      }
    }
    for (const auto& [m, c] : rhs) {
      if (std::abs(c) < 1e-14) continue;
      const std::size_t deg = m.dag.size() + m.pl.size();
      if (deg == 0) {
        sys.v(row) += c;
        continue;
      }
      const auto hit = tables().index.find(m);
      if (deg != 2 || hit == tables().index.end())
        throw std::logic_error(
            "assemble_moment_system: equations do not close at quadratic order");
      sys.M(row, hit->second) += c;
    }
  }
  return sys;
}

MomentSolution solve_steady_moments(const MomentSystem& sys) {
  // Two structural facts shape the solve. First, the physical solution is
  // conjugation-consistent (f at an index equals the conjugate of f at the
  // paired index), and near a bifurcation the matrix is ill-conditioned
  // enough that an unconstrained solve drifts off that manifold by far more
  // than roundoff. We therefore solve in the reduced real parametrization
  // where conjugate pairs share one complex unknown and self-paired entries
  // are real, which makes Hermiticity exact by construction. Second, the
  // diverging moments reach 1e4..1e5 where a plain double solve bottoms out
  // around 1e-10 in absolute residual, so the whole solve runs in extended
  // precision and the reported residual is that of the extended-precision
  // iterate.
  using ld = long double;
  using MatL = Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<ld, Eigen::Dynamic, 1>;
  using CMatL = Eigen::Matrix<std::complex<ld>, Eigen::Dynamic, Eigen::Dynamic>;
  using CVecL = Eigen::Matrix<std::complex<ld>, Eigen::Dynamic, 1>;
  const CMatL m = sys.M.cast<std::complex<ld>>();
  const CVecL v = sys.v.cast<std::complex<ld>>();

  // real unknowns: for a conjugate pair (r < rc) slots (k, k+1) hold
  // (Re f_r, Im f_r); a self-paired index holds its real value in one slot
  std::array<int, n_moments> slot{};
  std::array<bool, n_moments> is_rep{};
  int n_real = 0;
  for (int r = 0; r < n_moments; ++r) {
    const int rc = conjugate_index(r);
    if (rc < r) continue;
    is_rep[static_cast<std::size_t>(r)] = true;
    slot[static_cast<std::size_t>(r)] = n_real;
    n_real += (rc == r) ? 1 : 2;
  }
  if (n_real != n_moments)
    throw std::logic_error("conjugation pairing does not close");

  // independent real equations: Re and Im of each representative row for
  // pairs, Re only for self-conjugate rows (their Im part is redundant)
  MatL a = MatL::Zero(n_real, n_real);
  VecL b = VecL::Zero(n_real);
  int eq = 0;
  auto add_coeff = [&](int row_re, int row_im, int c,
                       const std::complex<ld>& coeff) {
    const int cc = conjugate_index(c);
    const int k = slot[static_cast<std::size_t>(std::min(c, cc))];
    // f_c = x_k (self) or x_k + i sgn x_{k+1} with sgn telling whether c is
    // the representative of its pair
    a(row_re, k) += coeff.real();
    if (row_im >= 0) a(row_im, k) += coeff.imag();
    if (cc != c) {
      const ld sgn = (c < cc) ? 1.0L : -1.0L;
      a(row_re, k + 1) += -sgn * coeff.imag();
      if (row_im >= 0) a(row_im, k + 1) += sgn * coeff.real();
    }
  };
  for (int r = 0; r < n_moments; ++r) {
    if (!is_rep[static_cast<std::size_t>(r)]) continue;
    const bool self = conjugate_index(r) == r;
    const int row_re = eq;
    const int row_im = self ? -1 : eq + 1;
    for (int c = 0; c < n_moments; ++c)
      if (m(r, c) != std::complex<ld>(0.0L, 0.0L))
        add_coeff(row_re, row_im, c, m(r, c));
    b(row_re) = v(r).real();
    if (row_im >= 0) b(row_im) = v(r).imag();
    eq += self ? 1 : 2;
  }

  Eigen::FullPivLU<MatL> lu(a);
  ld piv_min = std::numeric_limits<ld>::infinity(), piv_max = 0.0L;
  for (int i = 0; i < a.rows(); ++i) {
    const ld p = std::abs(lu.matrixLU()(i, i));
    piv_min = std::min(piv_min, p);
    piv_max = std::max(piv_max, p);
  }
  if (!lu.isInvertible() || piv_min <= 1e-13L * piv_max)
    throw std::runtime_error(
        "solve_steady_moments: the moment matrix is singular, no unique "
        "steady state");

  VecL x = lu.solve((-b).eval());
  for (int pass = 0; pass < 3; ++pass) {
    const VecL r = a * x + b;
    if (r.template lpNorm<Eigen::Infinity>() < 1e-15L) break;
    x -= lu.solve(r);
  }

  // reconstruct the complex vector (exactly Hermitian) and report the
  // residual of the original complex system at the extended-precision x
  CVecL f(n_moments);
  for (int r = 0; r < n_moments; ++r) {
    const int rc = conjugate_index(r);
    const int k = slot[static_cast<std::size_t>(std::min(r, rc))];
    if (rc == r)
      f(r) = std::complex<ld>(x(k), 0.0L);
    else
      f(r) = std::complex<ld>(x(k), (r < rc) ? x(k + 1) : -x(k + 1));
  }
  const ld res = (m * f + v).template lpNorm<Eigen::Infinity>();

  MomentSolution out;
  out.moments.values = f.cast<cplx>();
  out.residual = static_cast<double>(res);
  out.invertible = true;
  return out;
}

MomentSolution steady_moments(const ModelParams& p, const Equilibrium& e) {
  return solve_steady_moments(assemble_moment_system(p, e));
}

ScalingFit scaling_fit(const ModelParams& p, double g_from, double g_to,
                       const SemiclassicalState& seed,
                       const ScalingOptions& opts) {
  ScalingFit out;
  std::ostringstream diag;
  const Branch br = branch_continuation(p, g_from, g_to, seed, opts.continuation);
  out.cls = br.cls;
  if (br.points.empty()) {
    out.diagnostics = "continuation failed at the starting coupling";
    return out;
  }
  const double dir = (g_to >= g_from) ? 1.0 : -1.0;
  const double range = std::abs(g_to - g_from);

  bool have_star = false;
  for (const auto& ev : br.events) {
    using K = BifurcationKind;
    if (ev.kind == K::pitchfork_super || ev.kind == K::pitchfork_sub ||
        ev.kind == K::hopf || ev.kind == K::hopf_anomalous ||
        ev.kind == K::stability_flip) {
      out.g_star = ev.g;
      out.kind = ev.kind;
      have_star = true;
      diag << "stability lost via " << to_string(ev.kind) << " at g = " << ev.g
           << "; ";
      break;
    }
  }
  if (!have_star && br.lost) {
    // no crossing: the branch itself ended. Either it merged into a parent of
    // another class (a pitchfork seen from the emergent side) or it folded.
    // The parent is identified just beyond the termination point: at the
    // termination coupling itself all branches emerging from the same channel
    // coincide, but only the parent survives past it.
    out.g_star = br.g_last;
    have_star = true;
    const SemiclassicalState& last = br.points.back().eq.state;
    double scale = 1.0;
    for (int n = 0; n < n_sites; ++n)
      scale = std::max(scale, std::abs(last.alpha[static_cast<std::size_t>(n)]));

    ModelParams far = p;
    far.g = out.g_star + dir * std::max(1e-6, 1e-4 * range);
    const Equilibrium* parent = nullptr;
    double nearest = std::numeric_limits<double>::infinity();
    const auto candidates = find_equilibria(far);
    for (const auto& c : candidates) {
      if (c.cls == br.cls) continue;
      const double dist = orbit_distance(last, c.state);
      if (dist < nearest) {
        nearest = dist;
        parent = &c;
      }
    }
    if (parent != nullptr && nearest < 0.02 * scale) {
      out.kind = parent->stable ? BifurcationKind::pitchfork_super
                                : BifurcationKind::pitchfork_sub;
      diag << "branch merged into the " << to_string(parent->cls)
           << " branch at g = " << out.g_star << "; ";
    } else {
      out.kind = BifurcationKind::saddle_node;
      diag << "branch lost at g = " << out.g_star
           << " with no parent branch nearby; ";
    }
  }
  if (!have_star) {
    out.diagnostics = "no terminating bifurcation found in the sweep range";
    return out;
  }

  // walk the fit window from the far end inward so each solved equilibrium
  // seeds the next, tighter one
  SemiclassicalState cur = br.points.back().eq.state;
  {
    const double g_first = out.g_star - dir * opts.window_hi;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& bp : br.points) {
      const double d = std::abs(bp.g - g_first);
      if (d < best) {
        best = d;
        cur = bp.eq.state;
      }
    }
  }
  const double log_lo = std::log(opts.window_lo);
  const double log_hi = std::log(opts.window_hi);
  int rejected = 0;
  for (int i = 0; i < opts.points; ++i) {
    const double frac =
        opts.points > 1 ? static_cast<double>(i) / (opts.points - 1) : 0.0;
    const double dg = std::exp(log_hi + (log_lo - log_hi) * frac);
    ModelParams pl = p;
    pl.g = out.g_star - dir * dg;
    bool accepted = false;
    if (const auto ref = refine_equilibrium(pl, cur)) {
      try {
        const Equilibrium eq = analyze_equilibrium(pl, *ref);
        if (eq.cls == br.cls && eq.stable) {
          ScalingPoint pt;
          pt.delta_g = dg;
          try {
            const MomentSolution sol = steady_moments(pl, eq);
            pt.n_ph = sol.moments.photon_numbers();
            pt.residual = sol.residual;
            pt.herm_err = sol.moments.hermiticity_error();
            pt.psd_min = sol.moments.min_photon_eigenvalue();
            pt.det_ok = true;
          } catch (const std::runtime_error&) {
            pt.det_ok = false;
          }
          out.points.push_back(pt);
          cur = eq.state;
          accepted = true;
        }
      } catch (const std::invalid_argument&) {
      }
    }
    if (!accepted) ++rejected;
  }
  if (rejected > 0) diag << rejected << " window points rejected; ";

  int usable = 0;
  double worst_rms = 0.0;
  bool all_sites_fit = true;
  for (const auto& pt : out.points)
    if (pt.det_ok) ++usable;
  for (int s = 0; s < n_sites; ++s) {
    std::vector<double> xs, ys;
    for (const auto& pt : out.points) {
      const auto si = static_cast<std::size_t>(s);
      if (!pt.det_ok || !(pt.n_ph[si] > 0.0)) continue;
      xs.push_back(std::log10(pt.delta_g));
      ys.push_back(std::log10(pt.n_ph[si]));
    }
    const auto si = static_cast<std::size_t>(s);
    if (xs.size() < 4) {
      out.exponent[si] = 0.0;
      out.fit_rms[si] = std::numeric_limits<double>::infinity();
      all_sites_fit = false;
      continue;
    }
    const auto count = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      mx += xs[k];
      my += ys[k];
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxx += (xs[k] - mx) * (xs[k] - mx);
      sxy += (xs[k] - mx) * (ys[k] - my);
    }
    const double slope = sxy / sxx;
    out.exponent[si] = -slope;
    double ss = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double r = ys[k] - (my + slope * (xs[k] - mx));
      ss += r * r;
    }
    out.fit_rms[si] = std::sqrt(ss / count);
    worst_rms = std::max(worst_rms, out.fit_rms[si]);
  }
  const int needed = std::max(6, 2 * opts.points / 3);
  out.conclusive = all_sites_fit && usable >= needed && worst_rms < 0.1;
  out.diagnostics = diag.str();
  return out;
}

}  // namespace trimer
