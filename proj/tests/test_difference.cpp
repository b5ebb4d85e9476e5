#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "helpers.hpp"
#include "uqsim/difference.hpp"
#include "uqsim/exact.hpp"

using namespace uqsim;

namespace {

ModelParams plain(double p1, double p2, double tau) {
  ModelParams p;
  p.p1 = p1;
  p.p2 = p2;
  p.tau = tau;
  return p;
}

}  // namespace

TEST_CASE("every generator term preserves Hermiticity and trace") {
  RandomStream rng(501);
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams p = uqtest::random_params(rng, 0.5);
    DerivedModel m = derive(p);
    DensityMatrix rho = uqtest::random_state(rng);
    for (DiffTerm term : all_difference_terms()) {
      CMat2 t = difference_term(term, rho.m, m);
      double scale = std::max(1.0, max_abs(t));
      CHECK(herm_error(t) <= 1e-14 * scale);
      CHECK(std::abs(trace(t)) <= 1e-14 * scale);
    }
  }
}

TEST_CASE("term names are stable") {
  CHECK(std::string(to_string(DiffTerm::Dephasing)) == "dephasing");
  CHECK(std::string(to_string(DiffTerm::MixedOrderGroup)) ==
        "mixed_order_group");
  CHECK(all_difference_terms().size() == 8);
}

TEST_CASE("dephasing term: exponential decay of the coherences only") {
  DerivedModel m = derive(plain(0.3, 0.7, 0.01));
  double g = m.gamma;
  DensityMatrix rho = DensityMatrix::from_bloch(0.3, -0.2, 0.5);
  CMat2 t = difference_term(DiffTerm::Dephasing, rho.m, m);
  // d/dt (x, y, z) = (-g x/2, -g y/2, 0)
  CMat2 want = from_pauli(0.0, -g * 0.3 / 4.0, -g * (-0.2) / 4.0, 0.0);
  CHECK(uqtest::max_diff(t, want) < 1e-13 * std::max(1.0, g));
}

TEST_CASE("hamiltonian term: Larmor precession with the right handedness") {
  const double omega = 1.7;
  ModelParams p = plain(0.5, 0.5, 0.01);
  p.H = from_pauli(0.0, 0.0, 0.0, 0.5 * omega);  // (hbar omega / 2) sigma_z
  DerivedModel m = derive(p);
  DensityMatrix rho = DensityMatrix::from_bloch(0.8, -0.1, 0.4);
  CMat2 t = difference_term(DiffTerm::Hamiltonian, rho.m, m);
  // dx/dt = -omega y, dy/dt = +omega x, dz/dt = 0
  CMat2 want =
      from_pauli(0.0, -omega * (-0.1) / 2.0, omega * 0.8 / 2.0, 0.0);
  CHECK(uqtest::max_diff(t, want) < 1e-14);
}

TEST_CASE("friction term sign pinned by an exactly solvable step") {
  // H = 0, H+ = 0, H- = sigma_x. From the upper level the "+" branch
  // (weight p1) leaves the state alone while the "-" branch (weight
  // 1 - p1) rotates it about x, so the exact one-step change of <y> is
  // -2 (1 - p1) theta with theta = tau/hbar. The rule reproduces this as
  // -(1 - p0) theta from the averaged Hamiltonian plus -(delta_p/2) theta
  // from the friction term; flipping the friction sign would give
  // -2 (1 - p2) theta instead, distinguishable at 1e-4 while the correct
  // form agrees to 1e-8.
  ModelParams p = plain(0.3, 0.7, 1e-3);
  p.H_minus = from_pauli(0.0, 1.0, 0.0, 0.0);
  DerivedModel m = derive(p);
  const double theta = p.tau / p.hbar;
  DensityMatrix rho = DensityMatrix::from_bloch(0.0, 0.0, 1.0);

  DensityMatrix exact = nonselective_step(rho, m);
  double dy_exact = exact.bloch()[1];
  CHECK(std::abs(dy_exact - (-2.0 * (1.0 - p.p1) * theta)) < 1e-8);

  DensityMatrix rule = step_with_backaction(rho, m, p.tau);
  double dy_rule = rule.bloch()[1];
  CHECK(std::abs(dy_rule - dy_exact) < 1e-8);
  CHECK(std::abs(dy_rule - (-2.0 * (1.0 - p.p2) * theta)) > 1e-4);

  // and the friction term alone carries the -(delta_p/2) share
  CMat2 fr = difference_term(DiffTerm::BackactionFriction, rho.m, m);
  auto c = pauli_coefficients(fr * p.tau);
  CHECK(c[2] == doctest::Approx(-0.5 * m.delta_p * theta).epsilon(1e-12));
}

TEST_CASE("width factor is 1 at center, symmetric, and earns its keep") {
  DerivedModel center = derive(plain(0.4, 0.6, 0.01));
  CHECK(dephasing_width_factor(center) == 1.0);

  DerivedModel still = derive(plain(0.5, 0.5, 0.01));
  CHECK(dephasing_width_factor(still) == 1.0);

  DerivedModel lo = derive(plain(0.2, 0.4, 0.01));   // p0 = 0.3
  DerivedModel hi = derive(plain(0.6, 0.8, 0.01));   // p0 = 0.7
  CHECK(dephasing_width_factor(lo) ==
        doctest::Approx(dephasing_width_factor(hi)).epsilon(1e-14));
  CHECK(dephasing_width_factor(lo) != 1.0);

  // Against the exact per-step damping lambda^n, the corrected width
  // must beat the uncorrected gamma/2 rate off center.
  ModelParams p = plain(0.65, 0.85, 0.01);  // p0 = 0.75
  DerivedModel m = derive(p);
  const int n = 10;
  const double dt = n * p.tau;
  double lambda = std::sqrt(p.p1 * p.p2) +
                  std::sqrt((1.0 - p.p1) * (1.0 - p.p2));
  double target = std::pow(lambda, n);
  double kappa = dephasing_width_factor(m);
  double g = m.gamma;
  double with_kappa = 1.0 - kappa * g * dt / 2.0 + g * g * dt * dt / 8.0;
  double flat = 1.0 - g * dt / 2.0 + g * g * dt * dt / 8.0;
  CHECK(std::abs(with_kappa - target) < std::abs(flat - target));
}

TEST_CASE("pure dephasing chunk has a closed-form coherence factor") {
  ModelParams p = plain(0.35, 0.65, 0.02);
  DerivedModel m = derive(p);
  const int n = 8;
  const double dt = n * p.tau;
  DensityMatrix rho = DensityMatrix::from_bloch(0.6, 0.3, 0.2);

  double kappa = dephasing_width_factor(m);
  double g = m.gamma;
  double f = 1.0 - kappa * g * dt / 2.0 + g * g * dt * dt / 8.0;

  DensityMatrix out = step_higher_order(rho, m, dt, n);
  CHECK(std::abs(out.m(0, 1) - f * rho.m(0, 1)) < 1e-15);
  CHECK(std::abs(out.m(0, 0) - rho.m(0, 0)) < 1e-15);
  CHECK(std::abs(out.m(1, 1) - rho.m(1, 1)) < 1e-15);
}

TEST_CASE("update rules validate their step arguments") {
  DerivedModel m = derive(plain(0.4, 0.6, 0.01));
  DensityMatrix rho;
  CHECK_THROWS_AS(step_first_order(rho, m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(step_with_backaction(rho, m, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(step_higher_order(rho, m, 0.05, 4),  // 4*tau = 0.04
                  std::invalid_argument);
  CHECK_THROWS_AS(step_higher_order(rho, m, 0.0, 0), std::invalid_argument);
  DensityMatrix ok = step_higher_order(rho, m, 0.04, 4);
  CHECK(ok.trace_dev() < 1e-14);
}

TEST_CASE("local error of the first-order rule scales as the square of the step") {
  SUBCASE("decoherence-dominated family") {
    ModelParams p = plain(0.45, 0.55, 1e-4);
    p.H = from_pauli(0.0, 0.0, 0.0, 0.3);
    DerivedModel m = derive(p);
    DensityMatrix rho = DensityMatrix::from_bloch(0.7, 0.0, 0.7);
    ScalingReport rep =
        error_scaling_study(rho, m, {8, 16, 32, 64, 128}, Exec::Parallel);
    CHECK(rep.slope_first == doctest::Approx(2.0).epsilon(0.15));
    for (const auto& pt : rep.points) {
      CHECK(pt.err_higher < pt.err_first);
    }
    ScalingReport serial =
        error_scaling_study(rho, m, {8, 16, 32, 64, 128}, Exec::Serial);
    CHECK(serial.slope_first == rep.slope_first);
    CHECK(serial.slope_higher == rep.slope_higher);
  }

  SUBCASE("unitary-backaction family at delta_p = 0") {
    ModelParams p = plain(0.5, 0.5, 1e-4);
    p.H = from_pauli(0.0, 0.4, 0.0, 0.0);
    p.H_plus = from_pauli(0.0, 0.0, 0.0, 0.5);
    p.H_minus = from_pauli(0.0, 0.3, 0.0, 0.2);
    DerivedModel m = derive(p);
    DensityMatrix rho = DensityMatrix::from_bloch(0.0, 0.0, 1.0);
    ScalingReport rep =
        error_scaling_study(rho, m, {8, 16, 32, 64, 128}, Exec::Parallel);
    CHECK(rep.slope_first == doctest::Approx(2.0).epsilon(0.15));
  }

  CHECK_THROWS_AS(error_scaling_study(DensityMatrix(),
                                      derive(plain(0.4, 0.6, 0.01)), {8}),
                  std::invalid_argument);
}
