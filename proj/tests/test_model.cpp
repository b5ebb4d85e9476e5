#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "helpers.hpp"
#include "uqsim/model.hpp"

using namespace uqsim;

TEST_CASE("derived quantities for the symmetric reference model") {
  ModelParams p;
  p.p1 = 0.45;
  p.p2 = 0.55;
  p.tau = 0.01;
  DerivedModel m = derive(p);

  CHECK(m.p0 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.delta_p == doctest::Approx(0.1).epsilon(1e-15));
  // delta_p^2 / (4 p0 (1-p0) tau) = 0.01 / (4 * 0.25 * 0.01)
  CHECK(m.gamma == doctest::Approx(1.0).epsilon(1e-13));

  CHECK(uqtest::max_diff(m.M_plus_abs,
                         CMat2(std::sqrt(0.45), 0.0, 0.0, std::sqrt(0.55))) ==
        0.0);
  CHECK(uqtest::max_diff(m.M_minus_abs,
                         CMat2(std::sqrt(0.55), 0.0, 0.0, std::sqrt(0.45))) ==
        0.0);
  CHECK(uqtest::max_diff(m.E_plus, m.M_plus_abs * m.M_plus_abs) < 1e-15);
  CHECK(uqtest::max_diff(m.E_plus + m.E_minus, identity()) < 1e-15);
  CHECK(uqtest::max_diff(
            m.E_plus, m.p0 * identity() - (m.delta_p / 2.0) * pauli_z()) <
        1e-15);

  // All Hamiltonians default to zero, so every unitary is the identity.
  CHECK(uqtest::max_diff(m.U, identity()) == 0.0);
  CHECK(uqtest::max_diff(m.M_plus, m.M_plus_abs) == 0.0);
  CHECK(uqtest::max_diff(m.H_av, zero()) == 0.0);
  CHECK(uqtest::max_diff(m.delta_H, zero()) == 0.0);
}

TEST_CASE("derived operators with nonzero generators") {
  RandomStream rng(201);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams p = uqtest::random_params(rng, 0.5);
    DerivedModel m = derive(p);

    CHECK(uqtest::max_diff(m.U, herm_exp(p.H, p.tau, p.hbar)) == 0.0);
    CHECK(uqtest::max_diff(m.M_plus, m.U_plus * m.M_plus_abs) < 1e-15);
    CHECK(uqtest::max_diff(m.M_minus, m.U_minus * m.M_minus_abs) < 1e-15);
    CHECK(uqtest::max_diff(m.H_av,
                           m.p0 * p.H_plus + (1.0 - m.p0) * p.H_minus) <
          1e-15);
    CHECK(uqtest::max_diff(m.delta_H, p.H_minus - p.H_plus) == 0.0);
    CHECK(m.norm_H == doctest::Approx(op_norm(p.H)).epsilon(1e-14));

    // The measurement pair resolves the identity whatever the unitaries.
    CMat2 sum = adjoint(m.M_plus) * m.M_plus + adjoint(m.M_minus) * m.M_minus;
    CHECK(uqtest::max_diff(sum, identity()) < 1e-14);
  }
}

TEST_CASE("gamma vanishes only for equal probabilities") {
  ModelParams p;
  p.p1 = 0.5;
  p.p2 = 0.5;
  p.tau = 0.01;
  CHECK(derive(p).gamma == 0.0);

  // Sharp measurement: p1 = 0, p2 = 1 is legal and gives gamma = 1/tau.
  p.p1 = 0.0;
  p.p2 = 1.0;
  p.tau = 0.25;
  CHECK(derive(p).gamma == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("derive collects every parameter violation") {
  ModelParams p;
  p.p1 = 0.7;
  p.p2 = 0.3;  // ordering violated
  p.tau = 0.01;
  CHECK_THROWS_AS(derive(p), std::invalid_argument);

  p.p1 = -0.1;
  p.p2 = 1.2;
  p.tau = -1.0;
  p.hbar = 0.0;
  p.H = CMat2(0.0, 1.0, 0.0, 0.0);  // not Hermitian
  try {
    derive(p);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("p1") != std::string::npos);
    CHECK(msg.find("tau") != std::string::npos);
    CHECK(msg.find("hbar") != std::string::npos);
    CHECK(msg.find("H") != std::string::npos);
  }
}

TEST_CASE("outcome probabilities follow the level populations") {
  ModelParams p;
  p.p1 = 0.3;
  p.p2 = 0.8;
  p.tau = 0.01;
  DerivedModel m = derive(p);

  auto up = outcome_probabilities(DensityMatrix::from_bloch(0, 0, 1), m);
  CHECK(up.first == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(up.second == doctest::Approx(0.7).epsilon(1e-14));

  auto down = outcome_probabilities(DensityMatrix::from_bloch(0, 0, -1), m);
  CHECK(down.first == doctest::Approx(0.8).epsilon(1e-14));

  RandomStream rng(202);
  for (int trial = 0; trial < 10; ++trial) {
    auto pr = outcome_probabilities(uqtest::random_state(rng), m);
    CHECK(pr.first >= 0.0);
    CHECK(pr.second >= 0.0);
    CHECK(pr.first + pr.second == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("regime report flags the coarse-graining parameters") {
  ModelParams p;
  p.p1 = 0.495;
  p.p2 = 0.505;
  p.tau = 1e-4;
  DerivedModel m = derive(p);

  RegimeReport ok = check_regime(m, 100);  // 1/n = 0.01, n*delta_p = 1e-1?
  // n*delta_p = 100 * 0.01 = 1.0 would violate; use a narrower chunk.
  RegimeReport narrow = check_regime(m, 20);
  CHECK_FALSE(narrow.any_violated);
  (void)ok;

  // 1/n = 0.2 lands in the warning band.
  RegimeReport warn = check_regime(m, 5);
  CHECK(warn.any_warn);
  CHECK_FALSE(warn.any_violated);

  // 1/n = 1 violates outright.
  RegimeReport bad = check_regime(m, 1);
  CHECK(bad.any_violated);

  for (const auto& q : bad.items) CHECK(!q.name.empty());
  CHECK(std::string(to_string(RegimeStatus::Pass)) == "pass");
}
