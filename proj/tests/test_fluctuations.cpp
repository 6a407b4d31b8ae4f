#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fock_lindblad.hpp"
#include "trimer/dynamics.hpp"
#include "trimer/fluctuations.hpp"
#include "trimer/stability.hpp"

using namespace trimer;

namespace {

constexpr MomentFamily all_families[] = {
    MomentFamily::aa, MomentFamily::adad, MomentFamily::ada,
    MomentFamily::bb, MomentFamily::bdbd, MomentFamily::bdb,
    MomentFamily::ab, MomentFamily::adbd, MomentFamily::adb,
    MomentFamily::bda};

bool symmetric_family(MomentFamily f) {
  return f == MomentFamily::aa || f == MomentFamily::adad ||
         f == MomentFamily::bb || f == MomentFamily::bdbd;
}

ModelParams make_params(double g, double eta, double phi, double kappa,
                        double jbar = 0.3) {
  ModelParams p;
  p.g = g;
  p.eta = eta;
  p.phi = phi;
  p.kappa = kappa;
  p.jbar = jbar;
  return p;
}

std::optional<Equilibrium> stable_of(const ModelParams& p,
                                     EquilibriumClass cls) {
  for (const auto& e : find_equilibria(p))
    if (e.cls == cls && e.stable) return e;
  return std::nullopt;
}

// Literal transcription of the six dynamical equation families for the
// quadratic expectations, written independently of the symbolic assembly
// in the library: every coefficient below is typed in by hand. Rows for
// the conjugate families follow from d<O^dag>/dt = conj d<O>/dt.
MomentSystem expected_system(const ModelParams& p, const Equilibrium& e) {
  const auto cc = coupling_coefficients(p, e.state);
  const auto d = p.derived();
  const cplx im(0.0, 1.0);
  const cplx hop_p = d.j * std::exp(im * p.phi);   // J e^{+i phi}
  const cplx hop_m = d.j * std::exp(-im * p.phi);  // J e^{-i phi}

  MomentSystem sys;
  sys.M = Eigen::MatrixXcd::Zero(n_moments, n_moments);
  sys.v = Eigen::VectorXcd::Zero(n_moments);
  std::array<bool, n_moments> filled{};

  auto at = [](MomentFamily f, int n, int m) { return moment_index(f, n, m); };
  // the four recurring vertex combinations, per site
  auto c_ppmm = [&](int n) {  // ++, +-, -(-+), -(--)
    return cc.lam_pp[n] + cc.lam_pm[n] - cc.lam_mp[n] - cc.lam_mm[n];
  };
  auto c_pmmp = [&](int n) {  // ++, -(+-), -(-+), --
    return cc.lam_pp[n] - cc.lam_pm[n] - cc.lam_mp[n] + cc.lam_mm[n];
  };
  auto c_pppp = [&](int n) {  // all four summed
    return cc.lam_pp[n] + cc.lam_pm[n] + cc.lam_mp[n] + cc.lam_mm[n];
  };
  auto c_pmpm = [&](int n) {  // ++, -(+-), -+, -(--)
    return cc.lam_pp[n] - cc.lam_pm[n] + cc.lam_mp[n] - cc.lam_mm[n];
  };
  const auto& ws = cc.spin_freq;
  const double w0 = p.omega0;

  // family <a_n a_m>
  for (int n = 0; n < n_sites; ++n)
    for (int m = n; m < n_sites; ++m) {
      const int r = at(MomentFamily::aa, n, m);
      sys.M(r, r) += -2.0 * im * w0 - 2.0 * p.kappa;
      sys.M(r, at(MomentFamily::ab, m, n)) += -im * c_ppmm(n);
      sys.M(r, at(MomentFamily::bda, n, m)) += -im * c_pmmp(n);
      sys.M(r, at(MomentFamily::ab, n, m)) += -im * c_ppmm(m);
      sys.M(r, at(MomentFamily::bda, m, n)) += -im * c_pmmp(m);
      sys.M(r, at(MomentFamily::aa, site_prev(n), m)) += -im * hop_m;
      sys.M(r, at(MomentFamily::aa, n, site_prev(m))) += -im * hop_m;
      sys.M(r, at(MomentFamily::aa, site_next(n), m)) += -im * hop_p;
      sys.M(r, at(MomentFamily::aa, n, site_next(m))) += -im * hop_p;
      filled[static_cast<std::size_t>(r)] = true;
    }

  // family <a_n^dag a_m>
  for (int n = 0; n < n_sites; ++n)
    for (int m = 0; m < n_sites; ++m) {
      const int r = at(MomentFamily::ada, n, m);
      sys.M(r, r) += -2.0 * p.kappa;
      sys.M(r, at(MomentFamily::ab, m, n)) += im * c_pppp(n);
      sys.M(r, at(MomentFamily::adb, n, m)) += -im * c_ppmm(m);
      sys.M(r, at(MomentFamily::bda, n, m)) += im * c_pmpm(n);
      sys.M(r, at(MomentFamily::adbd, n, m)) += -im * c_pmmp(m);
      sys.M(r, at(MomentFamily::ada, site_prev(n), m)) += im * hop_p;
      sys.M(r, at(MomentFamily::ada, n, site_next(m))) += -im * hop_p;
      sys.M(r, at(MomentFamily::ada, site_next(n), m)) += im * hop_m;
      sys.M(r, at(MomentFamily::ada, n, site_prev(m))) += -im * hop_m;
      filled[static_cast<std::size_t>(r)] = true;
    }

  // family <b_n b_m>
  for (int n = 0; n < n_sites; ++n)
    for (int m = n; m < n_sites; ++m) {
      const int r = at(MomentFamily::bb, n, m);
      sys.M(r, r) += -im * (ws[static_cast<std::size_t>(n)] +
                            ws[static_cast<std::size_t>(m)]);
      sys.M(r, at(MomentFamily::ab, n, m)) += -im * c_pmpm(n);
      sys.M(r, at(MomentFamily::adb, n, m)) += -im * c_pmmp(n);
      sys.M(r, at(MomentFamily::ab, m, n)) += -im * c_pmpm(m);
      sys.M(r, at(MomentFamily::adb, m, n)) += -im * c_pmmp(m);
      filled[static_cast<std::size_t>(r)] = true;
    }

  // family <b_n^dag b_m>
  for (int n = 0; n < n_sites; ++n)
    for (int m = 0; m < n_sites; ++m) {
      const int r = at(MomentFamily::bdb, n, m);
      sys.M(r, r) += im * (ws[static_cast<std::size_t>(n)] -
                           ws[static_cast<std::size_t>(m)]);
      sys.M(r, at(MomentFamily::ab, n, m)) += im * c_pppp(n);
      sys.M(r, at(MomentFamily::adb, n, m)) += im * c_ppmm(n);
      sys.M(r, at(MomentFamily::bda, n, m)) += -im * c_pmpm(m);
      sys.M(r, at(MomentFamily::adbd, m, n)) += -im * c_pmmp(m);
      filled[static_cast<std::size_t>(r)] = true;
    }

  // family <a_n b_m>, the only rows carrying an inhomogeneity
  for (int n = 0; n < n_sites; ++n)
    for (int m = 0; m < n_sites; ++m) {
      const int r = at(MomentFamily::ab, n, m);
      sys.M(r, r) += -im * (w0 + ws[static_cast<std::size_t>(m)]) - p.kappa;
      sys.M(r, at(MomentFamily::bb, n, m)) += -im * c_ppmm(n);
      sys.M(r, at(MomentFamily::bdb, n, m)) += -im * c_pmmp(n);
      sys.M(r, at(MomentFamily::aa, n, m)) += -im * c_pmpm(m);
      sys.M(r, at(MomentFamily::ada, m, n)) += -im * c_pmmp(m);
      if (n == m) sys.v(r) += -im * c_pmmp(m);
      sys.M(r, at(MomentFamily::ab, site_prev(n), m)) += -im * hop_m;
      sys.M(r, at(MomentFamily::ab, site_next(n), m)) += -im * hop_p;
      filled[static_cast<std::size_t>(r)] = true;
    }

  // family <a_n^dag b_m>
  for (int n = 0; n < n_sites; ++n)
    for (int m = 0; m < n_sites; ++m) {
      const int r = at(MomentFamily::adb, n, m);
      sys.M(r, r) += im * (w0 - ws[static_cast<std::size_t>(m)]) - p.kappa;
      sys.M(r, at(MomentFamily::bb, n, m)) += im * c_pppp(n);
      sys.M(r, at(MomentFamily::bdb, n, m)) += im * c_pmpm(n);
      sys.M(r, at(MomentFamily::ada, n, m)) += -im * c_pmpm(m);
      sys.M(r, at(MomentFamily::adad, n, m)) += -im * c_pmmp(m);
      sys.M(r, at(MomentFamily::adb, site_prev(n), m)) += im * hop_p;
      sys.M(r, at(MomentFamily::adb, site_next(n), m)) += im * hop_m;
      filled[static_cast<std::size_t>(r)] = true;
    }

  // remaining rows are conjugates of the ones above
  for (int r = 0; r < n_moments; ++r) {
    if (filled[static_cast<std::size_t>(r)]) continue;
    const int s = conjugate_index(r);
    REQUIRE(filled[static_cast<std::size_t>(s)]);
    for (int c = 0; c < n_moments; ++c)
      sys.M(r, conjugate_index(c)) = std::conj(sys.M(s, c));
    sys.v(r) = std::conj(sys.v(s));
  }
  return sys;
}

void check_system_matches(const ModelParams& p, const Equilibrium& e) {
  const MomentSystem got = assemble_moment_system(p, e);
  const MomentSystem want = expected_system(p, e);
  CHECK((got.M - want.M).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((got.v - want.v).cwiseAbs().maxCoeff() < 1e-12);
}

}  // namespace

TEST_CASE("moment indexing covers all 78 pairs exactly once") {
  std::array<int, n_moments> hits{};
  for (MomentFamily f : all_families)
    for (int n = 0; n < n_sites; ++n)
      for (int m = (symmetric_family(f) ? n : 0); m < n_sites; ++m) {
        const int idx = moment_index(f, n, m);
        REQUIRE(idx >= 0);
        REQUIRE(idx < n_moments);
        ++hits[static_cast<std::size_t>(idx)];
      }
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

  // exchange-symmetric families ignore the argument order
  CHECK(moment_index(MomentFamily::aa, 2, 0) ==
        moment_index(MomentFamily::aa, 0, 2));
  CHECK(moment_index(MomentFamily::bdbd, 1, 2) ==
        moment_index(MomentFamily::bdbd, 2, 1));
  // non-symmetric families do not
  CHECK(moment_index(MomentFamily::ada, 0, 1) !=
        moment_index(MomentFamily::ada, 1, 0));

  CHECK_THROWS_AS(moment_index(MomentFamily::aa, -1, 0), std::out_of_range);
  CHECK_THROWS_AS(moment_index(MomentFamily::ab, 0, 3), std::out_of_range);
}

TEST_CASE("conjugation pairing is an involution with the right partners") {
  for (int idx = 0; idx < n_moments; ++idx)
    CHECK(conjugate_index(conjugate_index(idx)) == idx);

  CHECK(conjugate_index(moment_index(MomentFamily::aa, 0, 1)) ==
        moment_index(MomentFamily::adad, 0, 1));
  CHECK(conjugate_index(moment_index(MomentFamily::ada, 0, 1)) ==
        moment_index(MomentFamily::ada, 1, 0));
  CHECK(conjugate_index(moment_index(MomentFamily::ada, 2, 2)) ==
        moment_index(MomentFamily::ada, 2, 2));
  CHECK(conjugate_index(moment_index(MomentFamily::bb, 1, 2)) ==
        moment_index(MomentFamily::bdbd, 1, 2));
  CHECK(conjugate_index(moment_index(MomentFamily::bdb, 1, 0)) ==
        moment_index(MomentFamily::bdb, 0, 1));
  CHECK(conjugate_index(moment_index(MomentFamily::ab, 1, 2)) ==
        moment_index(MomentFamily::adbd, 1, 2));
  CHECK(conjugate_index(moment_index(MomentFamily::adb, 0, 2)) ==
        moment_index(MomentFamily::bda, 2, 0));

  CHECK_THROWS_AS(conjugate_index(-1), std::out_of_range);
  CHECK_THROWS_AS(conjugate_index(n_moments), std::out_of_range);
}

TEST_CASE("coupling coefficients at a dark site reduce to the bare vertices") {
  const ModelParams p = make_params(0.8, 0.6, 0.4, 0.3);
  const auto d = p.derived();
  const auto cc = coupling_coefficients(p, normal_state(-1));
  for (int n = 0; n < n_sites; ++n) {
    const auto u = static_cast<std::size_t>(n);
    CHECK(std::abs(cc.lam_pp[u] - d.lambda * d.eta_plus) < 1e-14);
    CHECK(std::abs(cc.lam_mm[u] + d.lambda * d.eta_minus) < 1e-14);
    CHECK(std::abs(cc.lam_pm[u]) < 1e-14);
    CHECK(std::abs(cc.lam_mp[u]) < 1e-14);
    CHECK(cc.spin_freq[u] == doctest::Approx(p.omega_a).epsilon(1e-12));
  }
}

TEST_CASE("coupling coefficients on a lit equilibrium") {
  const ModelParams p = make_params(0.9, 1.0, 0.0, 0.1);
  const auto e = stable_of(p, EquilibriumClass::fs);
  REQUIRE(e.has_value());
  const auto cc = coupling_coefficients(p, e->state);
  const auto d = p.derived();
  for (int n = 0; n < n_sites; ++n) {
    const auto u = static_cast<std::size_t>(n);
    // vertex structure: the ++ and -- vertices are real, the cross ones
    // imaginary
    CHECK(std::abs(cc.lam_pp[u].imag()) < 1e-14);
    CHECK(std::abs(cc.lam_mm[u].imag()) < 1e-14);
    CHECK(std::abs(cc.lam_pm[u].real()) < 1e-14);
    CHECK(std::abs(cc.lam_mp[u].real()) < 1e-14);
    // the rotated-frame spin gap equals the polaron dispersion built from
    // the equilibrium field
    const cplx a = e->state.alpha[u];
    const double quad = std::sqrt(
        std::pow(d.eta_plus * a.real(), 2) + std::pow(d.eta_minus * a.imag(), 2));
    const double gap = std::sqrt(p.omega_a * p.omega_a +
                                 16.0 * d.lambda * d.lambda * quad * quad);
    CHECK(cc.spin_freq[u] == doctest::Approx(gap).epsilon(1e-9));
  }

  // spins on the upper hemisphere have no stable rotated frame
  CHECK_THROWS_AS(coupling_coefficients(p, normal_state(+1)),
                  std::invalid_argument);
}

TEST_CASE("assembled system matches the hand-written equation families") {
  SUBCASE("dark state with a complex hopping phase") {
    const ModelParams p = make_params(0.3, 0.6, 0.7, 0.2);
    const Equilibrium e = analyze_equilibrium(p, normal_state(-1));
    REQUIRE(e.stable);
    check_system_matches(p, e);
  }
  SUBCASE("asymmetric lit state") {
    const ModelParams p = make_params(0.9, 1.0, 0.0, 0.1);
    const auto e = stable_of(p, EquilibriumClass::fs);
    REQUIRE(e.has_value());
    check_system_matches(p, *e);
  }
  SUBCASE("uniform lit state with both vertex channels active") {
    const ModelParams p = make_params(3.05, 0.0355, 0.0, 0.1);
    const auto e = stable_of(p, EquilibriumClass::nfs);
    REQUIRE(e.has_value());
    check_system_matches(p, *e);
  }
}

TEST_CASE("assembly output is conjugation-symmetric") {
  const ModelParams p = make_params(0.9, 1.0, 0.0, 0.1);
  const auto e = stable_of(p, EquilibriumClass::fs);
  REQUIRE(e.has_value());
  const MomentSystem sys = assemble_moment_system(p, *e);
  double worst = 0.0;
  for (int r = 0; r < n_moments; ++r) {
    for (int c = 0; c < n_moments; ++c)
      worst = std::max(worst,
                       std::abs(sys.M(conjugate_index(r), conjugate_index(c)) -
                                std::conj(sys.M(r, c))));
    worst = std::max(
        worst, std::abs(sys.v(conjugate_index(r)) - std::conj(sys.v(r))));
  }
  CHECK(worst == 0.0);
}

TEST_CASE("zero coupling decouples the cavity and spin sectors") {
  const ModelParams p = make_params(0.0, 0.5, 0.4, 0.25);
  // with the coupling off the spins are undamped, so the dark state is only
  // marginally stable; assembly accepts it (no eigenvalue in the right half
  // plane) even though the flow is not attracting
  const Equilibrium e = analyze_equilibrium(p, normal_state(-1));
  REQUIRE(e.max_re() <= 1e-9);
  const MomentSystem sys = assemble_moment_system(p, e);

  // canonical layout: cavity pairs occupy [0, 21), spin pairs [21, 42),
  // mixed pairs [42, 78)
  const int cav = 21, spin = 42;
  double cross = 0.0;
  for (int r = 0; r < n_moments; ++r)
    for (int c = 0; c < n_moments; ++c) {
      const bool rc = r < cav, cc_ = c < cav;
      const bool rs = r >= cav && r < spin, cs = c >= cav && c < spin;
      const bool rm = r >= spin, cm = c >= spin;
      if ((rc && !cc_) || (rs && !cs) || (rm && !cm))
        cross = std::max(cross, std::abs(sys.M(r, c)));
    }
  CHECK(cross == 0.0);

  // the full system is singular (spin occupations are conserved), so the
  // solver must refuse it
  CHECK_THROWS_AS(solve_steady_moments(sys), std::runtime_error);

  // the decoupled lossy-cavity block alone has the vacuum as its unique
  // steady state
  CHECK(sys.v.head(cav).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXcd mc = sys.M.topLeftCorner(cav, cav);
  const Eigen::FullPivLU<Eigen::MatrixXcd> lu(mc);
  REQUIRE(lu.isInvertible());
  const Eigen::VectorXcd f = lu.solve((-sys.v.head(cav)).eval());
  CHECK(f.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dark-state moments far below threshold are small and uniform") {
  const ModelParams p = make_params(0.2, 0.7, 0.3, 0.2);
  const Equilibrium e = analyze_equilibrium(p, normal_state(-1));
  REQUIRE(e.stable);
  const MomentSolution sol = steady_moments(p, e);
  CHECK(sol.invertible);
  CHECK(sol.residual < 1e-10);
  CHECK(sol.moments.hermiticity_error() < 1e-10);
  CHECK(sol.moments.min_photon_eigenvalue() > -1e-8);
  const auto n_ph = sol.moments.photon_numbers();
  for (double n : n_ph) {
    CHECK(n >= -1e-10);
    CHECK(n < 0.05);
  }
  CHECK(std::abs(n_ph[0] - n_ph[1]) < 1e-10);
  CHECK(std::abs(n_ph[0] - n_ph[2]) < 1e-10);
}

TEST_CASE("moments of a uniform equilibrium are translation covariant") {
  const ModelParams p = make_params(3.05, 0.0355, 0.0, 0.1);
  const auto e = stable_of(p, EquilibriumClass::nfs);
  REQUIRE(e.has_value());
  const MomentSolution sol = steady_moments(p, *e);
  CHECK(sol.residual < 1e-10);
  double worst = 0.0;
  for (MomentFamily f : all_families)
    for (int n = 0; n < n_sites; ++n)
      for (int m = 0; m < n_sites; ++m)
        worst = std::max(
            worst, std::abs(sol.moments.get(f, n, m) -
                            sol.moments.get(f, site_next(n), site_next(m))));
  CHECK(worst < 1e-7);
  const auto n_ph = sol.moments.photon_numbers();
  CHECK(n_ph[0] == doctest::Approx(1.92087797).epsilon(1e-5));
}

TEST_CASE("the closed system has no unique steady state") {
  const ModelParams p = make_params(0.5, 1.0, 0.0, 0.0);
  const Equilibrium e = analyze_equilibrium(p, normal_state(-1));
  const MomentSystem sys = assemble_moment_system(p, e);
  // quasiparticle occupations are conserved without loss, so the moment
  // matrix always has a kernel
  CHECK_THROWS_AS(solve_steady_moments(sys), std::runtime_error);
}

TEST_CASE("unstable equilibria are rejected") {
  const ModelParams p = make_params(1.0, 1.0, 0.0, 0.1);
  const Equilibrium e = analyze_equilibrium(p, normal_state(-1));
  REQUIRE(!e.stable);
  CHECK_THROWS_AS(assemble_moment_system(p, e), std::invalid_argument);
  CHECK_THROWS_AS(steady_moments(p, e), std::invalid_argument);
}

TEST_CASE("single-site moments agree with a truncated-Fock steady state") {
  // one decoupled site, moderately below its lasing threshold
  ModelParams p = make_params(0.8, 1.0, 0.0, 0.3, 0.0);
  const Equilibrium e = analyze_equilibrium(p, normal_state(-1));
  REQUIRE(e.stable);
  const MomentSolution sol = steady_moments(p, e);
  const auto n_ph = sol.moments.photon_numbers();
  CHECK(n_ph[0] == doctest::Approx(0.1937777778).epsilon(1e-8));
  CHECK(n_ph[1] == doctest::Approx(n_ph[0]).epsilon(1e-12));
  CHECK(n_ph[2] == doctest::Approx(n_ph[0]).epsilon(1e-12));

  const auto d = p.derived();
  const auto fock = trimer_test::fock_steady_photon_number(
      p.omega0, p.omega_a, d.lambda, d.eta_plus, d.eta_minus, p.kappa,
      /*n_atoms=*/20, /*n_max=*/30);
  CHECK(fock.trace_error < 1e-6);
  CHECK(fock.n_ph == doctest::Approx(0.174798).epsilon(2e-3));
  // the Gaussian value carries a finite-size error of order 1/n_atoms
  CHECK(std::abs(fock.n_ph - n_ph[0]) / n_ph[0] < 0.10);
}

TEST_CASE("photon-number scaling cuts") {
  auto check_points = [](const ScalingFit& fit) {
    REQUIRE(!fit.points.empty());
    for (const auto& pt : fit.points) {
      CHECK(pt.det_ok);
      CHECK(pt.residual < 1e-10);
      CHECK(pt.herm_err < 1e-10);
      CHECK(pt.psd_min > -1e-8);
    }
  };

  SUBCASE("uniform dark branch: mean-field exponent at every site") {
    const ModelParams p = make_params(0.7, 1.0, 0.0, 0.1);
    const ScalingFit fit = scaling_fit(p, 0.7, 0.9, normal_state(-1));
    CHECK(fit.kind == BifurcationKind::pitchfork_super);
    CHECK(fit.cls == EquilibriumClass::normal);
    CHECK(fit.g_star == doctest::Approx(0.845154).epsilon(2e-3));
    REQUIRE(fit.conclusive);
    check_points(fit);
    for (double ex : fit.exponent) CHECK(std::abs(ex - 1.0) < 0.1);
  }

  SUBCASE("asymmetric branch: one mean-field site, doubled pair") {
    const ModelParams p = make_params(0.9, 1.0, 0.0, 0.1);
    const auto seed = stable_of(p, EquilibriumClass::fs);
    REQUIRE(seed.has_value());
    const ScalingFit fit = scaling_fit(p, 0.9, 0.8, seed->state);
    CHECK(fit.kind == BifurcationKind::pitchfork_super);
    CHECK(fit.g_star == doctest::Approx(0.845154).epsilon(2e-3));
    REQUIRE(fit.conclusive);
    check_points(fit);

    // the site with the distinct (larger) field keeps the mean-field
    // exponent; the equal pair picks up the doubled one
    int lone = 0;
    for (int n = 1; n < n_sites; ++n)
      if (std::abs(seed->state.alpha[static_cast<std::size_t>(n)]) >
          std::abs(seed->state.alpha[static_cast<std::size_t>(lone)]))
        lone = n;
    std::array<double, n_sites> ex = fit.exponent;
    CHECK(std::abs(ex[static_cast<std::size_t>(lone)] - 1.0) < 0.1);
    for (int n = 0; n < n_sites; ++n)
      if (n != lone) CHECK(std::abs(ex[static_cast<std::size_t>(n)] - 2.0) < 0.15);
  }

  SUBCASE("pi-flux uniform branch: mean-field exponent") {
    const ModelParams p = make_params(0.75, 1.0, M_PI, 0.1);
    const auto seed = stable_of(p, EquilibriumClass::nfs);
    REQUIRE(seed.has_value());
    const ScalingFit fit = scaling_fit(p, 0.75, 0.6, seed->state);
    CHECK(fit.kind == BifurcationKind::pitchfork_super);
    CHECK(fit.g_star == doctest::Approx(0.65192).epsilon(2e-3));
    REQUIRE(fit.conclusive);
    check_points(fit);
    for (double ex : fit.exponent) CHECK(std::abs(ex - 1.0) < 0.1);
  }

  SUBCASE("pi-flux mixed branch: doubled exponent at every site") {
    const ModelParams p = make_params(2.1, 0.2, M_PI, 0.1);
    const auto seed = stable_of(p, EquilibriumClass::mixed);
    REQUIRE(seed.has_value());
    const ScalingFit fit = scaling_fit(p, 2.1, 1.8, seed->state);
    CHECK(fit.kind == BifurcationKind::pitchfork_super);
    CHECK(fit.g_star == doctest::Approx(1.91046).epsilon(2e-3));
    REQUIRE(fit.conclusive);
    check_points(fit);
    for (double ex : fit.exponent) CHECK(std::abs(ex - 2.0) < 0.15);
  }

  SUBCASE("lifted time reversal: dark branch ends in a Hopf point") {
    const ModelParams p = make_params(0.5, 0.3, 0.1, 0.1);
    ScalingOptions opts;
    opts.continuation.verify_oscillation = true;
    const ScalingFit fit = scaling_fit(p, 0.5, 1.6, normal_state(-1), opts);
    CHECK(fit.kind == BifurcationKind::hopf);
    CHECK(fit.g_star == doctest::Approx(1.30616).epsilon(2e-3));
    REQUIRE(fit.conclusive);
    check_points(fit);
    // mean-field scaling all the way up to the crossing
    for (double ex : fit.exponent) CHECK(std::abs(ex - 1.0) < 0.1);
  }
}
