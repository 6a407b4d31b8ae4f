#include "doctest.h"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "trimer/params.hpp"

using namespace trimer;

TEST_CASE("derived couplings follow the definitions") {
  ModelParams p;
  p.omega0 = 1.0;
  p.omega_a = 2.0;
  p.g = 0.8;
  p.eta = 0.4;
  p.jbar = 0.25;
  const DerivedCouplings d = p.derived();
  CHECK(d.eta_plus == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(d.eta_minus == doctest::Approx(0.3).epsilon(1e-15));
  // g = 2 lambda / sqrt(omega0 omega_a)
  CHECK(d.lambda == doctest::Approx(0.5 * 0.8 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(d.j == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("from_raw rescales to omega0 units") {
  // raw inputs in arbitrary units: omega0 = 2, omega_a = 3, lambda = 0.6,
  // J = 0.5; the stored parameters are dimensionless ratios
  const ModelParams p = ModelParams::from_raw(2.0, 3.0, 0.6, 0.3, 0.5, 1.2, 0.1, 50);
  CHECK(p.omega0 == doctest::Approx(1.0));
  CHECK(p.omega_a == doctest::Approx(1.5));
  CHECK(p.g == doctest::Approx(2.0 * 0.6 / std::sqrt(2.0 * 3.0)));
  CHECK(p.jbar == doctest::Approx(0.25));
  CHECK(p.kappa == doctest::Approx(0.05));
  CHECK(p.eta == doctest::Approx(0.3));
  CHECK(p.phi == doctest::Approx(1.2));
  CHECK(p.n_atoms == 50);
}

TEST_CASE("validation rejects out-of-domain parameters") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());

  ModelParams bad = p;
  bad.omega_a = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.phi = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.phi = 3.2;  // above pi
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.kappa = -0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.n_atoms = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.eta = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("hopping stability window") {
  ModelParams p;
  p.jbar = 0.3;
  p.phi = 0.0;
  CHECK(p.hopping_valid());

  // 1 + 2 jbar cos(phi) <= 0 at phi = pi for jbar >= 0.5
  p.jbar = 0.6;
  p.phi = M_PI;
  CHECK_FALSE(p.hopping_valid());
  CHECK(p.hopping_violation().find("1 + 2*jbar*cos(phi)") != std::string::npos);

  // the other face of the window: 1 - 2 jbar cos(phi - pi/3) <= 0
  p.jbar = 0.6;
  p.phi = M_PI / 3.0;
  CHECK_FALSE(p.hopping_valid());
  CHECK(p.hopping_violation().find("pi/3") != std::string::npos);

  // jbar < 0.5 keeps every flux stable
  p.jbar = 0.49;
  for (double phi : {0.0, 0.5, 1.0, 2.0, 3.0, M_PI}) {
    p.phi = phi;
    CHECK(p.hopping_valid());
  }
}

TEST_CASE("json round trip preserves every field") {
  ModelParams p;
  p.omega_a = 1.7;
  p.g = 1.23456789012345;
  p.eta = -0.25;
  p.jbar = 0.41;
  p.phi = 2.9;
  p.kappa = 0.15;
  p.n_atoms = 12;

  const std::string path = "model_roundtrip.json";
  save_params(p, path);
  const ModelParams q = load_params(path);
  CHECK(q.omega0 == doctest::Approx(p.omega0).epsilon(1e-15));
  CHECK(q.omega_a == doctest::Approx(p.omega_a).epsilon(1e-15));
  CHECK(q.g == doctest::Approx(p.g).epsilon(1e-15));
  CHECK(q.eta == doctest::Approx(p.eta).epsilon(1e-15));
  CHECK(q.jbar == doctest::Approx(p.jbar).epsilon(1e-15));
  CHECK(q.phi == doctest::Approx(p.phi).epsilon(1e-15));
  CHECK(q.kappa == doctest::Approx(p.kappa).epsilon(1e-15));
  CHECK(q.n_atoms == p.n_atoms);
  std::remove(path.c_str());
}

TEST_CASE("unknown json keys are rejected") {
  const std::string path = "model_badkey.json";
  {
    std::ofstream out(path);
    out << "{\"g\": 1.0, \"coupling_g\": 2.0}";
  }
  CHECK_THROWS_AS(load_params(path), std::invalid_argument);
  std::remove(path.c_str());
}

TEST_CASE("site ring helpers wrap around") {
  CHECK(site_next(0) == 1);
  CHECK(site_next(2) == 0);
  CHECK(site_prev(0) == 2);
  CHECK(site_prev(1) == 0);
}
