#include "trimer/quadratic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trimer {

Eigen::MatrixXd symplectic_form(int n) {
  Eigen::MatrixXd om = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    om(2 * i, 2 * i + 1) = 1.0;
    om(2 * i + 1, 2 * i) = -1.0;
  }
  return om;
}

namespace {

double sym_prod(const Eigen::MatrixXd& om, const Eigen::VectorXd& x,
                const Eigen::VectorXd& y) {
  return x.dot(om * y);
}

// remove the symplectic components of x along the accepted (a_j, b_j) pairs
void symplectic_project_out(const Eigen::MatrixXd& om,
                            const std::vector<Eigen::VectorXd>& as,
                            const std::vector<Eigen::VectorXd>& bs,
                            Eigen::VectorXd& x) {
  for (size_t j = 0; j < as.size(); ++j) {
    const double qa = sym_prod(om, x, bs[j]);
    const double pa = sym_prod(om, as[j], x);
    x -= qa * as[j];
    x -= pa * bs[j];
  }
}

// Degenerate symplectic eigenvalues leave the normal-form basis free up to
// a unitary mixing of the pairs, and a generic eigensolver can blend the
// soft coordinate of one pair with the stiff one of another. Fix the gauge
// per degenerate group so the new q coordinates are as soft as possible:
// Takagi-factorize the bilinear Gram matrix of the complex rows q + ip of
// S^-1 and rotate its diagonal to the negative real axis, which minimizes
// the summed q-row norms; then split any remaining rotational freedom by
// diagonalizing the q-row overlaps. The result is deterministic and varies
// smoothly along parameter sweeps.
void fix_degenerate_gauge(const Eigen::MatrixXd& om, Eigen::MatrixXd& s,
                          const Eigen::VectorXd& eps, double zero_tol) {
  const int pairs = static_cast<int>(eps.size());
  Eigen::MatrixXd sinv = -om * s.transpose() * om;
  int i0 = 0;
  while (i0 < pairs) {
    int i1 = i0 + 1;
    while (i1 < pairs && eps[i1] - eps[i1 - 1] <= 1e-8 * std::max(1.0, eps[i1]))
      ++i1;
    const int m = i1 - i0;
    if (m < 2 || eps[i0] < zero_tol) {
      i0 = i1;
      continue;
    }
    Eigen::MatrixXcd z(m, s.rows());
    for (int k = 0; k < m; ++k)
      z.row(k) = sinv.row(2 * (i0 + k)).cast<std::complex<double>>() +
                 std::complex<double>(0, 1) *
                     sinv.row(2 * (i0 + k) + 1).cast<std::complex<double>>();
    const Eigen::MatrixXcd c = z * z.transpose();
    // Takagi vectors of c from the real symmetric embedding of v -> c conj(v)
    Eigen::MatrixXd emb(2 * m, 2 * m);
    emb.topLeftCorner(m, m) = c.real();
    emb.topRightCorner(m, m) = c.imag();
    emb.bottomLeftCorner(m, m) = c.imag();
    emb.bottomRightCorner(m, m) = -c.real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tak(emb);
    Eigen::MatrixXcd v(m, m);
    for (int k = 0; k < m; ++k) {
      const Eigen::VectorXd col = tak.eigenvectors().col(2 * m - 1 - k);
      v.col(k) = col.head(m).cast<std::complex<double>>() +
                 std::complex<double>(0, 1) * col.tail(m).cast<std::complex<double>>();
    }
    Eigen::MatrixXcd u = std::complex<double>(0, 1) * v.adjoint();
    // leftover real-orthogonal freedom within equal singular values: order
    // the q rows by their norms
    const Eigen::MatrixXcd zr = u * z;
    Eigen::MatrixXd gq(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        gq(a, b) = zr.row(a).real().dot(zr.row(b).real());
    int a0 = 0;
    while (a0 < m) {
      const double sig0 = tak.eigenvalues()(2 * m - 1 - a0);
      int a1 = a0 + 1;
      while (a1 < m && sig0 - tak.eigenvalues()(2 * m - 1 - a1) <=
                           1e-6 * std::max(1.0, sig0))
        ++a1;
      if (a1 - a0 > 1) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oq(
            gq.block(a0, a0, a1 - a0, a1 - a0));
        u.middleRows(a0, a1 - a0) =
            oq.eigenvectors().transpose() * u.middleRows(a0, a1 - a0);
      }
      a0 = a1;
    }
    // real embedding acting on the interleaved (q, p) rows, applied to the
    // columns of S through its transpose
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        r(2 * a, 2 * b) = u(a, b).real();
        r(2 * a, 2 * b + 1) = -u(a, b).imag();
        r(2 * a + 1, 2 * b) = u(a, b).imag();
        r(2 * a + 1, 2 * b + 1) = u(a, b).real();
      }
    s.middleCols(2 * i0, 2 * m) = s.middleCols(2 * i0, 2 * m) * r.transpose();
    i0 = i1;
  }
}

}  // namespace

SymplecticSpectrum williamson(const Eigen::MatrixXd& h, double zero_tol) {
  const int n = static_cast<int>(h.rows());
  if (n % 2 != 0 || h.cols() != n)
    throw SpectralError("williamson: matrix must be even-dimensional square");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw SpectralError("williamson: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hes(h);
  if (hes.eigenvalues().minCoeff() < -1e-8 * scale)
    throw SpectralError("williamson: matrix not positive semidefinite");

  const Eigen::MatrixXd om = symplectic_form(n / 2);
  Eigen::EigenSolver<Eigen::MatrixXd> es(om * h);

  struct Raw {
    double eps;
    Eigen::VectorXd u, w;
  };
  std::vector<Raw> raw;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()[i];
    if (lam.imag() <= 0.0) continue;
    raw.push_back({lam.imag(), es.eigenvectors().col(i).real(),
                   es.eigenvectors().col(i).imag()});
  }
  std::sort(raw.begin(), raw.end(),
            [](const Raw& a, const Raw& b) { return a.eps < b.eps; });

  std::vector<Eigen::VectorXd> as, bs;
  std::vector<double> eps_list;
  for (auto& m : raw) {
    if (m.eps < zero_tol) continue;  // handled with the flat directions below
    Eigen::VectorXd u = m.u, w = m.w;
    symplectic_project_out(om, as, bs, u);
    symplectic_project_out(om, as, bs, w);
    double s = sym_prod(om, u, w);
    if (s < 0.0) {
      w = -w;
      s = -s;
    }
    const double floor = 1e-12 * std::max(1.0, u.norm() * w.norm());
    if (s < floor) continue;  // collapsed pair, treat as flat below
    const double r = std::sqrt(s);
    as.push_back(u / r);
    bs.push_back(w / r);
    eps_list.push_back(m.eps);
  }

  // Flat (or numerically flat) directions: build canonical pairs on the
  // symplectic complement of everything accepted so far. The q-like column
  // carries the residual curvature, the p-like column is the flat one.
  const int deficit = n / 2 - static_cast<int>(as.size());
  std::vector<double> zero_eps(deficit, 0.0);
  if (deficit > 0) {
    // orthonormal basis of the complement (rank-revealing over projections)
    std::vector<Eigen::VectorXd> pool;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(n, i);
      symplectic_project_out(om, as, bs, e);
      for (const auto& prev : pool) e -= e.dot(prev) * prev;
      if (e.norm() > 1e-8) pool.push_back(e.normalized());
      if (static_cast<int>(pool.size()) == 2 * deficit) break;
    }
    for (int k = 0; k < deficit; ++k) {
      const int dim = static_cast<int>(pool.size());
      Eigen::MatrixXd basis(n, dim);
      for (int i = 0; i < dim; ++i) basis.col(i) = pool[i];
      const Eigen::MatrixXd hv = basis.transpose() * h * basis;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ev(hv);
      const Eigen::VectorXd flat = basis * ev.eigenvectors().col(0);
      // partner with the largest symplectic overlap
      int best = -1;
      double bestov = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double ov = std::abs(sym_prod(om, pool[i], flat));
        if (ov > bestov) {
          bestov = ov;
          best = i;
        }
      }
      if (best < 0 || bestov < 1e-10)
        throw SpectralError("williamson: degenerate flat subspace");
      Eigen::VectorXd partner = pool[best];
      const double s = sym_prod(om, partner, flat);
      Eigen::VectorXd a = partner / s;  // omega(a, b) = 1 with b = flat
      as.push_back(a);
      bs.push_back(flat);
      // shrink the pool
      std::vector<Eigen::VectorXd> next;
      for (auto& v : pool) {
        symplectic_project_out(om, {as.back()}, {bs.back()}, v);
        for (const auto& prev : next) v -= v.dot(prev) * prev;
        if (v.norm() > 1e-8) next.push_back(v.normalized());
      }
      pool = std::move(next);
    }
  }

  // assemble, sorted by eps (flat modes first)
  std::vector<int> order(as.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> eps_all(as.size(), 0.0);
  for (size_t i = 0; i < eps_list.size(); ++i) eps_all[i] = eps_list[i];
  for (size_t i = eps_list.size(); i < as.size(); ++i) eps_all[i] = 0.0;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return eps_all[a] < eps_all[b]; });

  SymplecticSpectrum out;
  out.eps.resize(n / 2);
  out.s.resize(n, n);
  for (int i = 0; i < n / 2; ++i) {
    out.eps[i] = eps_all[order[i]];
    out.s.col(2 * i) = as[order[i]];
    out.s.col(2 * i + 1) = bs[order[i]];
  }
  fix_degenerate_gauge(om, out.s, out.eps, zero_tol);
  out.zero_mode = out.eps[0] < zero_tol;
  return out;
}

namespace {

// 4x4 on-site block in the (q, p, Q, P) basis
Eigen::Matrix4d site_block(const ModelParams& p, const cplx& abar) {
  const auto d = p.derived();
  const double gw = p.g * std::sqrt(p.omega0 * p.omega_a);
  const double x = abar.real(), y = abar.imag();
  const double a2 = d.eta_plus * d.eta_plus * x * x + d.eta_minus * d.eta_minus * y * y;
  const double a = std::sqrt(a2);
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  if (a < 1e-12) {
    m(0, 0) = m(1, 1) = p.omega0;
    m(2, 2) = m(3, 3) = p.omega_a;
    m(0, 2) = m(2, 0) = -gw * d.eta_plus;
    m(1, 3) = m(3, 1) = -gw * d.eta_minus;
    return m;
  }
  const double srt = std::sqrt(1.0 + 4.0 * p.g * p.g * a2);
  m(0, 0) = m(1, 1) = p.omega0;
  m(2, 2) = m(3, 3) = p.omega_a * srt;
  m(0, 2) = m(2, 0) = gw * d.eta_plus * d.eta_plus * x / (a * srt);
  m(0, 3) = m(3, 0) = -gw * d.eta_plus * d.eta_minus * y / a;
  m(1, 2) = m(2, 1) = gw * d.eta_minus * d.eta_minus * y / (a * srt);
  m(1, 3) = m(3, 1) = gw * d.eta_plus * d.eta_minus * x / a;
  return m;
}

}  // namespace

Mat12 build_hq(const ModelParams& p, const GroundState& gs) {
  const Vec6 grad = energy_gradient(p, gs.fields);
  if (grad.lpNorm<Eigen::Infinity>() > 1e-8)
    throw std::invalid_argument("build_hq: configuration is not stationary");
  const double j = p.jbar * p.omega0;
  const double c = std::cos(p.phi), s = std::sin(p.phi);
  Eigen::Matrix4d hop = Eigen::Matrix4d::Zero();
  hop(0, 0) = hop(1, 1) = j * c;
  hop(0, 1) = -j * s;
  hop(1, 0) = j * s;
  Mat12 h = Mat12::Zero();
  for (int n = 0; n < n_sites; ++n) {
    h.block<4, 4>(4 * n, 4 * n) = site_block(p, gs.fields.alpha[n]);
    const int m = site_next(n);
    h.block<4, 4>(4 * n, 4 * m) = hop;
    h.block<4, 4>(4 * m, 4 * n) = hop.transpose();
  }
  return h;
}

std::array<double, 2> k0_dispersion(const ModelParams& p, const GroundState& gs) {
  if (gs.phase == Phase::frustrated_sr)
    throw std::invalid_argument("k0_dispersion needs a site-independent configuration");
  const auto d = p.derived();
  const double gw = p.g * std::sqrt(p.omega0 * p.omega_a);
  const double j = p.jbar * p.omega0;
  const cplx ab = gs.fields.alpha[0];
  const double x = ab.real(), y = ab.imag();
  const double a2 = d.eta_plus * d.eta_plus * x * x + d.eta_minus * d.eta_minus * y * y;
  const double a = std::sqrt(a2);
  const double srt = std::sqrt(1.0 + 4.0 * p.g * p.g * a2);
  // couplings of the k = 0 quadratic block [[D1 I, C], [C^T, D2 I]] in the
  // (q, p | Q, P) basis, C = [[r1, i2], [i1, r2]]
  double r1, r2, i1, i2;
  if (a < 1e-12) {
    r1 = -gw * d.eta_plus;
    r2 = -gw * d.eta_minus;
    i1 = i2 = 0.0;
  } else {
    r1 = gw * d.eta_plus * d.eta_plus * x / (a * srt);
    r2 = gw * d.eta_plus * d.eta_minus * x / a;
    i1 = gw * d.eta_minus * d.eta_minus * y / (a * srt);
    i2 = -gw * d.eta_plus * d.eta_minus * y / a;
  }
  const double d1 = p.omega0 + 2.0 * j * std::cos(p.phi);
  const double d2 = p.omega_a * srt;
  // eps^4 - P eps^2 + Q = 0 with Q = det of the block form
  const double pp = d1 * d1 + d2 * d2 + 2.0 * r1 * r2 - 2.0 * i1 * i2;
  const double qq = (d1 * d2 - r1 * r1 - i1 * i1) * (d1 * d2 - r2 * r2 - i2 * i2) -
                    (r1 * i2 + i1 * r2) * (r1 * i2 + i1 * r2);
  const double disc = std::sqrt(std::max(0.0, 0.25 * pp * pp - qq));
  const double lo2 = 0.5 * pp - disc, hi2 = 0.5 * pp + disc;
  return {std::sqrt(std::max(0.0, lo2)), std::sqrt(std::max(0.0, hi2))};
}

SiteVariances ground_variance(const SymplecticSpectrum& ss) {
  SiteVariances v;
  if (ss.zero_mode) {
    const double inf = std::numeric_limits<double>::infinity();
    v.q2 = {inf, inf, inf};
    v.p2 = {inf, inf, inf};
    return v;
  }
  const Eigen::MatrixXd cov = 0.5 * ss.s * ss.s.transpose();
  for (int n = 0; n < n_sites; ++n) {
    v.q2[n] = cov(4 * n, 4 * n);
    v.p2[n] = cov(4 * n + 1, 4 * n + 1);
  }
  return v;
}

namespace {

// order `cur` to continue `prev` branches: brute-force best permutation
std::array<double, 6> match_branches(const std::array<double, 6>& prev,
                                     const Eigen::VectorXd& cur) {
  std::array<int, 6> idx = {0, 1, 2, 3, 4, 5};
  std::array<int, 6> best = idx;
  double best_cost = std::numeric_limits<double>::infinity();
  std::sort(idx.begin(), idx.end());
  do {
    double cost = 0.0;
    for (int i = 0; i < 6; ++i) cost += std::abs(prev[i] - cur[idx[i]]);
    if (cost < best_cost) {
      best_cost = cost;
      best = idx;
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  std::array<double, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = cur[best[i]];
  return out;
}

}  // namespace

std::vector<SweepPoint> spectrum_sweep(const ModelParams& base,
                                       const std::vector<double>& g_values,
                                       unsigned long long rng_seed) {
  std::vector<SweepPoint> out;
  out.reserve(g_values.size());
  std::optional<FieldConfiguration> prev_fields;
  std::optional<std::array<double, 6>> prev_eps;
  for (double g : g_values) {
    ModelParams p = base;
    p.g = g;
    SweepPoint pt;
    pt.g = g;
    try {
      MinimizeOptions opts;
      opts.rng_seed = rng_seed;
      if (prev_fields) opts.extra_seeds.push_back(*prev_fields);
      const GroundState gs = minimize_ground_state(p, opts);
      const Mat12 hq = build_hq(p, gs);
      const SymplecticSpectrum ss = williamson(hq);
      pt.phase = gs.phase;
      pt.zero_mode = ss.zero_mode;
      pt.min_energy = gs.energy;
      Eigen::VectorXd eps = ss.eps;
      if (prev_eps) {
        pt.eps = match_branches(*prev_eps, eps);
      } else {
        for (int i = 0; i < 6; ++i) pt.eps[i] = eps[i];
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      if (gs.phase == Phase::frustrated_sr) {
        pt.eps_k0 = {nan, nan};
      } else {
        pt.eps_k0 = k0_dispersion(p, gs);
      }
      const SiteVariances sv = ground_variance(ss);
      pt.var_q = sv.q2;
      pt.ok = true;
      prev_fields = gs.fields;
      prev_eps = pt.eps;
    } catch (const std::exception&) {
      pt.ok = false;  // row kept as a gap marker
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace trimer
