#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "trimer/quadratic.hpp"

using namespace trimer;

namespace {

// the two defining properties pin the output down completely: S symplectic
// and S^T H S in normal form with ascending pair values
void check_normal_form(const Eigen::MatrixXd& h, const SymplecticSpectrum& ss,
                       double tol = 1e-9) {
  const int n = static_cast<int>(h.rows());
  const Eigen::MatrixXd omega = symplectic_form(n / 2);
  CHECK((ss.s.transpose() * omega * ss.s - omega).norm() < tol);
  const Eigen::MatrixXd d = ss.s.transpose() * h * ss.s;
  Eigen::MatrixXd offdiag = d;
  offdiag.diagonal().setZero();
  CHECK(offdiag.norm() < tol * std::max(1.0, h.norm()));
  for (int i = 0; i + 1 < n / 2; ++i) CHECK(ss.eps(i) <= ss.eps(i + 1) + tol);
  if (!ss.zero_mode) {
    for (int i = 0; i < n / 2; ++i) {
      CHECK(d(2 * i, 2 * i) == doctest::Approx(ss.eps(i)).epsilon(1e-8));
      CHECK(d(2 * i + 1, 2 * i + 1) == doctest::Approx(ss.eps(i)).epsilon(1e-8));
    }
  }
}

GroundState minimize(const ModelParams& p) { return minimize_ground_state(p); }

}  // namespace

TEST_CASE("williamson normal form on random positive definite matrices") {
  std::mt19937_64 rng(314);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int n2 : {4, 6, 12}) {
    for (int rep = 0; rep < 4; ++rep) {
      Eigen::MatrixXd m(n2, n2);
      for (int i = 0; i < n2; ++i)
        for (int j = 0; j < n2; ++j) m(i, j) = gauss(rng);
      const Eigen::MatrixXd h =
          m.transpose() * m + 0.05 * Eigen::MatrixXd::Identity(n2, n2);
      const SymplecticSpectrum ss = williamson(h);
      CHECK_FALSE(ss.zero_mode);
      check_normal_form(h, ss);
      // independent eigenvalue oracle: positive imaginary parts of Omega H
      Eigen::EigenSolver<Eigen::MatrixXd> es(symplectic_form(n2 / 2) * h);
      std::vector<double> pos;
      for (int i = 0; i < n2; ++i)
        if (es.eigenvalues()(i).imag() > 0.0)
          pos.push_back(es.eigenvalues()(i).imag());
      std::sort(pos.begin(), pos.end());
      REQUIRE(static_cast<int>(pos.size()) == n2 / 2);
      for (int i = 0; i < n2 / 2; ++i)
        CHECK(ss.eps(i) == doctest::Approx(pos[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("williamson handles degenerate spectra") {
  // isotropic harmonic block structure with exact double degeneracy
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(6, 6);
  h(4, 4) = h(5, 5) = 2.5;
  const SymplecticSpectrum ss = williamson(h);
  check_normal_form(h, ss, 1e-10);
  CHECK(ss.eps(0) == doctest::Approx(1.0));
  CHECK(ss.eps(1) == doctest::Approx(1.0));
  CHECK(ss.eps(2) == doctest::Approx(2.5));
}

TEST_CASE("williamson flat pair: zero-curvature direction is kept symplectic") {
  Eigen::VectorXd diag(6);
  diag << 1.0, 1.0, 2.0, 0.0, 3.0, 3.0;
  const Eigen::MatrixXd h = diag.asDiagonal();
  const SymplecticSpectrum ss = williamson(h);
  CHECK(ss.zero_mode);
  const Eigen::MatrixXd omega = symplectic_form(3);
  CHECK((ss.s.transpose() * omega * ss.s - omega).norm() < 1e-9);
  const Eigen::MatrixXd d = ss.s.transpose() * h * ss.s;
  Eigen::MatrixXd off = d;
  off.diagonal().setZero();
  CHECK(off.norm() < 1e-9);
  // flat pair reported first with eps 0; its q-side curvature stays positive
  CHECK(ss.eps(0) == doctest::Approx(0.0));
  CHECK(ss.eps(1) == doctest::Approx(1.0));
  CHECK(ss.eps(2) == doctest::Approx(3.0));
  CHECK(d(0, 0) > 0.0);
  CHECK(std::abs(d(1, 1)) < 1e-9);
}

TEST_CASE("williamson rejects asymmetric and indefinite input") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(4, 4);
  h(0, 1) = 0.3;  // not symmetric
  CHECK_THROWS_AS(williamson(h), SpectralError);
  h = -Eigen::MatrixXd::Identity(4, 4);
  CHECK_THROWS_AS(williamson(h), SpectralError);
}

TEST_CASE("normal phase spectrum at g = 0 is the bare band plus atoms") {
  ModelParams p;
  p.g = 1e-13;  // strictly zero coupling leaves the phase ambiguous; tiny g
  p.jbar = 0.3;
  p.phi = 0.0;
  const GroundState gs = minimize(p);
  const Mat12 h = build_hq(p, gs);
  const SymplecticSpectrum ss = williamson(h);
  // photon band omega0 + 2 jbar cos(k): 1.6 once, 0.7 twice; atoms at 1
  CHECK(ss.eps(0) == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(ss.eps(1) == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(ss.eps(2) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(ss.eps(3) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(ss.eps(4) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(ss.eps(5) == doctest::Approx(1.6).epsilon(1e-10));
  check_normal_form(h, ss);
}

TEST_CASE("quadratic form requires a stationary configuration") {
  ModelParams p;
  p.g = 0.5;
  GroundState gs = minimize(p);
  gs.fields.alpha[1] += 0.05;  // spoil stationarity
  CHECK_THROWS_AS(build_hq(p, gs), std::invalid_argument);
}

TEST_CASE("soft mode closes exactly at the landscape critical coupling") {
  // at zero flux the frustrated doublet closes together; at phi = pi the
  // uniform mode closes alone
  struct Cut {
    double phi;
    int n_soft;
  };
  for (const Cut cut : {Cut{0.0, 2}, Cut{M_PI, 1}}) {
    ModelParams p;
    p.eta = 1.0;
    p.jbar = 0.3;
    p.phi = cut.phi;
    const auto cc = critical_coupling(p);
    p.g = cc.g_c * (1.0 - 1e-8);
    const GroundState gs = minimize(p);
    REQUIRE(gs.phase == Phase::normal);
    const SymplecticSpectrum ss = williamson(build_hq(p, gs), 1e-12);
    INFO("phi = ", cut.phi);
    for (int i = 0; i < cut.n_soft; ++i) CHECK(ss.eps(i) < 2e-4);
    CHECK(ss.eps(cut.n_soft) > 1e-2);  // next branch still gapped
  }
}

TEST_CASE("k = 0 pair agrees with the full 12x12 spectrum") {
  ModelParams p;
  p.eta = 1.0;
  p.jbar = 0.3;

  SUBCASE("normal phase") {
    p.phi = M_PI;
    p.g = 0.4;
  }
  SUBCASE("uniform superradiant phase") {
    p.phi = M_PI;
    p.g = 1.0;
  }
  SUBCASE("anisotropic normal phase") {
    p.phi = 2.6;
    p.eta = 0.35;
    p.g = 0.3;
  }

  const GroundState gs = minimize(p);
  const auto pair = k0_dispersion(p, gs);
  const SymplecticSpectrum ss = williamson(build_hq(p, gs));
  for (double target : pair) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 6; ++i) best = std::min(best, std::abs(ss.eps(i) - target));
    INFO("target = ", target);
    CHECK(best < 1e-9);
  }
}

TEST_CASE("vacuum quadrature variance is one half") {
  ModelParams p;
  p.g = 1e-13;
  p.jbar = 0.3;  // hopping alone must not squeeze anything
  p.phi = 1.1;
  const GroundState gs = minimize(p);
  const SiteVariances v = ground_variance(williamson(build_hq(p, gs)));
  for (int n = 0; n < n_sites; ++n) {
    CHECK(v.q2[n] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(v.p2[n] == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("quadrature variance grows toward the divergent transition") {
  ModelParams p;
  p.eta = 1.0;
  p.jbar = 0.1;
  p.phi = M_PI;  // uniform transition: q-variance diverges at g_c
  const auto cc = critical_coupling(p);
  double prev = 0.0;
  for (double frac : {0.5, 0.9, 0.99, 0.999}) {
    p.g = frac * cc.g_c;
    const GroundState gs = minimize(p);
    const SiteVariances v = ground_variance(williamson(build_hq(p, gs), 1e-10));
    CHECK(v.q2[0] > prev);
    prev = v.q2[0];
  }
  CHECK(prev > 3.0);  // clearly diverging scale by delta g = 1e-3 g_c
}

TEST_CASE("goldstone zero mode at eta = 0 in the broken phase") {
  ModelParams p;
  p.eta = 0.0;
  p.phi = M_PI;
  p.jbar = 0.3;
  p.g = 1.4;  // the instability coupling doubles at eta = 0
  const GroundState gs = minimize(p);
  REQUIRE(gs.u1_orbit);
  const SymplecticSpectrum ss = williamson(build_hq(p, gs));
  CHECK(ss.zero_mode);
  const SiteVariances v = ground_variance(ss);
  CHECK(std::isinf(v.q2[0]));
}

TEST_CASE("spectrum sweep crosses the uniform transition cleanly") {
  ModelParams base;
  base.eta = 1.0;
  base.jbar = 0.3;
  base.phi = M_PI;
  std::vector<double> gs;
  for (int i = 0; i <= 40; ++i) gs.push_back(0.30 + 0.5 * i / 40.0);
  const auto sweep = spectrum_sweep(base, gs);
  REQUIRE(sweep.size() == gs.size());

  const double gc = std::sqrt(0.4);
  double min_soft = 1.0;
  for (const auto& pt : sweep) {
    REQUIRE(pt.ok);
    CHECK(pt.phase == (pt.g < gc ? Phase::normal : Phase::uniform_sr));
    double lo = std::numeric_limits<double>::infinity();
    for (double e : pt.eps) lo = std::min(lo, e);
    min_soft = std::min(min_soft, lo);
    // k = 0 closed form applies on both sides of this cut
    CHECK(std::isfinite(pt.eps_k0[0]));
  }
  CHECK(min_soft < 0.1);

  // energies decrease monotonically with g in the broken phase
  for (size_t i = 1; i < sweep.size(); ++i)
    if (sweep[i - 1].g > gc) CHECK(sweep[i].min_energy <= sweep[i - 1].min_energy + 1e-12);
}

TEST_CASE("sweep branches stay continuous through the frustrated phase") {
  ModelParams base;
  base.eta = 1.0;
  base.jbar = 0.3;
  base.phi = 0.0;
  std::vector<double> gs;
  for (int i = 0; i <= 50; ++i) gs.push_back(0.60 + 0.8 * i / 50.0);
  const auto sweep = spectrum_sweep(base, gs);
  for (size_t i = 1; i < sweep.size(); ++i) {
    REQUIRE(sweep[i].ok);
    for (int b = 0; b < 6; ++b) {
      // nearest-neighbor matched branches should move smoothly
      CHECK(std::abs(sweep[i].eps[b] - sweep[i - 1].eps[b]) < 0.25);
    }
    if (sweep[i].phase == Phase::frustrated_sr)
      CHECK(std::isnan(sweep[i].eps_k0[0]));
  }
}
