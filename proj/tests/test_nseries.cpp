#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "helpers.hpp"
#include "uqsim/exact.hpp"
#include "uqsim/nseries.hpp"

using namespace uqsim;

namespace {

ModelParams symmetric(double delta_p, double tau) {
  ModelParams p;
  p.p1 = 0.5 - 0.5 * delta_p;
  p.p2 = 0.5 + 0.5 * delta_p;
  p.tau = tau;
  return p;
}

NSeriesConfig grid_config(const DerivedModel& m, int n) {
  NSeriesConfig cfg;
  cfg.n_measurements = n;
  cfg.grid = SGrid::uniform(m.gamma, n * m.params.tau);
  return cfg;
}

}  // namespace

TEST_CASE("binomial family resolves the identity") {
  RandomStream rng(401);
  for (int trial = 0; trial < 8; ++trial) {
    ModelParams p = uqtest::random_params(rng, 0.3);
    DerivedModel m = derive(p);
    for (int n : {1, 10, 50}) {
      CHECK(binomial_completeness(m, n) < 1e-12);
    }
  }
  // extreme probabilities stress the log-domain magnitudes
  DerivedModel edge = derive(symmetric(0.98, 0.01));
  CHECK(binomial_completeness(edge, 50) < 1e-12);
}

TEST_CASE("one-element chunk equals one measurement period") {
  RandomStream rng(402);
  ModelParams p = uqtest::random_params(rng, 0.4);
  DerivedModel m = derive(p);
  DensityMatrix rho = uqtest::random_state(rng);
  DensityMatrix chunk = binomial_nonselective(rho, m, 1);
  DensityMatrix step = nonselective_step(rho, m);
  CHECK(uqtest::max_diff(chunk.m, step.m) < 1e-15);
}

TEST_CASE("binomial chunk is exact when all generators commute") {
  // With H = H+ = H- = 0 every factor is diagonal, so regrouping the
  // product by outcome count is not an approximation at all.
  DerivedModel m = derive(symmetric(0.3, 0.02));
  DensityMatrix rho = DensityMatrix::from_bloch(0.8, 0.0, 0.6);
  const int n = 40;
  DensityMatrix chunk = binomial_nonselective(rho, m, n);
  DensityMatrix direct = run_nonselective(rho, m, n).back();
  CHECK(trace_distance(chunk, direct) < 1e-14);
}

TEST_CASE("binomial element magnitudes follow the counting weights") {
  DerivedModel m = derive(symmetric(0.2, 0.01));
  const int n = 6, a = 2;
  CMat2 el = binomial_element(a, n, m);
  // C(6,2) = 15; level i contributes p_i^(a/2) (1-p_i)^((n-a)/2)
  double c = std::sqrt(15.0);
  double want11 = c * std::pow(0.4, 1.0) * std::pow(0.6, 2.0);
  double want22 = c * std::pow(0.6, 1.0) * std::pow(0.4, 2.0);
  CHECK(std::abs(el(0, 0) - want11) < 1e-14);
  CHECK(std::abs(el(1, 1) - want22) < 1e-14);
  CHECK(std::abs(el(0, 1)) == 0.0);

  CHECK_THROWS_AS(binomial_element(7, 6, m), std::invalid_argument);
  CHECK_THROWS_AS(binomial_element(-1, 6, m), std::invalid_argument);

  // sharp edge: zero probability raised to a positive count kills the entry
  DerivedModel sharp = derive([] {
    ModelParams q;
    q.p1 = 0.0;
    q.p2 = 1.0;
    q.tau = 0.01;
    return q;
  }());
  CMat2 dead = binomial_element(3, 5, sharp);
  CHECK(std::abs(dead(0, 0)) == 0.0);  // p1^3 with p1 = 0
  CHECK(std::abs(dead(1, 1)) == 0.0);  // (1-p2)^2 with p2 = 1
}

TEST_CASE("gaussian family resolves the identity across the operating range") {
  for (double p0 : {0.2, 0.35, 0.5, 0.65, 0.8}) {
    ModelParams p;
    p.p1 = p0 - 0.05;
    p.p2 = p0 + 0.05;
    p.tau = 0.01;
    DerivedModel m = derive(p);
    const int n = 100;
    NSeriesConfig cfg = grid_config(m, n);
    CompletenessReport scalar =
        gaussian_completeness(m, n * p.tau, cfg);
    CHECK(scalar.full_grid_dev < 2e-6);

    cfg.use_qnumber_width = true;
    CompletenessReport qnum = gaussian_completeness(m, n * p.tau, cfg);
    CHECK(qnum.full_grid_dev < 2e-6);

    // off-center models leak weight into unphysical readouts
    CHECK(scalar.physical_range_dev >= 0.0);
    if (p0 == 0.5) CHECK(scalar.physical_range_dev < 1e-6);
  }
}

TEST_CASE("gaussian element validates its inputs") {
  DerivedModel still = derive(symmetric(0.0, 0.01));
  CHECK_THROWS_AS(gaussian_element(0.0, still, 1.0), std::invalid_argument);

  DerivedModel m = derive(symmetric(0.1, 0.01));
  CHECK_THROWS_AS(gaussian_element(0.0, m, 0.0), std::invalid_argument);

  ModelParams sharp;
  sharp.p1 = 0.0;
  sharp.p2 = 1.0;
  sharp.tau = 0.01;
  CHECK_THROWS_AS(gaussian_element(0.0, derive(sharp), 0.5, true),
                  std::invalid_argument);

  GaussianElement el = gaussian_element(0.4, m, 1.0);
  CHECK(el.s == 0.4);
  CHECK(herm_error(el.abs_part) == 0.0);
  CHECK(uqtest::max_diff(adjoint(el.backaction) * el.backaction, identity()) <
        1e-14);
  CHECK(uqtest::max_diff(el.M, el.backaction * el.abs_part) < 1e-15);
}

TEST_CASE("readout variable maps to outcome rates and back") {
  DerivedModel m = derive(symmetric(0.14, 0.01));
  for (int a : {0, 3, 17, 37}) {
    double s = s_from_rate(a, 37, m);
    RateValue rv = rate_from_s(s, m, 37);
    CHECK(rv.physical);
    CHECK(rv.count == doctest::Approx(static_cast<double>(a)).epsilon(1e-12));
  }
  // the physical window is 0 <= p0 - (delta_p/2) s <= 1
  RateValue out = rate_from_s(2.0 * (0.5 + 0.2) / 0.14, m, 10);
  CHECK_FALSE(out.physical);

  DerivedModel still = derive(symmetric(0.0, 0.01));
  CHECK_THROWS_AS(s_from_rate(1, 10, still), std::domain_error);
}

TEST_CASE("readout moments match the closed-form mean and variance") {
  DerivedModel m = derive(symmetric(0.1, 0.01));
  const int n = 100;
  const double dt = n * m.params.tau;
  NSeriesConfig cfg = grid_config(m, n);
  DensityMatrix rho = DensityMatrix::from_bloch(0.4, 0.2, 0.3);

  ReadoutMoments mom = readout_moments(rho, m, dt, cfg);
  CHECK(mom.mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(mom.mean == doctest::Approx(0.3).epsilon(1e-9));
  double want_var = 1.0 / (m.gamma * dt) + (1.0 - 0.3 * 0.3);
  CHECK(mom.variance == doctest::Approx(want_var).epsilon(1e-9));
}

TEST_CASE("quadrature diagnostics flag an unusable grid") {
  DerivedModel m = derive(symmetric(0.1, 0.01));
  const double dt = 1.0;

  QuadratureDiag good = quadrature_diagnostics(SGrid::uniform(m.gamma, dt), m, dt);
  CHECK(good.resolved);
  CHECK(good.sigma_s == doctest::Approx(1.0 / std::sqrt(m.gamma * dt)));
  CHECK(good.tail_mass_estimate < 1e-12);

  QuadratureDiag coarse =
      quadrature_diagnostics(SGrid::uniform(m.gamma, dt, 9), m, dt);
  CHECK_FALSE(coarse.resolved);

  QuadratureDiag narrow =
      quadrature_diagnostics(SGrid::uniform(m.gamma, dt, 801, 2.0), m, dt);
  CHECK_FALSE(narrow.resolved);

  CHECK_THROWS_AS(SGrid::uniform(m.gamma, dt, 1), std::invalid_argument);
  CHECK_THROWS_AS(SGrid::uniform(0.0, dt), std::invalid_argument);
}

TEST_CASE("gaussian chunk approaches the binomial chunk for many measurements") {
  ModelParams p = symmetric(0.02, 0.005);
  p.H = from_pauli(0.0, 0.05, 0.0, 0.0);
  p.H_plus = from_pauli(0.0, 0.0, 0.0, 0.04);
  p.H_minus = from_pauli(0.0, 0.03, 0.0, 0.0);
  DerivedModel m = derive(p);
  DensityMatrix rho = DensityMatrix::from_bloch(0.7, 0.1, 0.5);

  const int n = 200;
  NSeriesConfig cfg = grid_config(m, n);
  DensityMatrix gauss =
      nseries_nonselective(rho, m, n * p.tau, cfg, Exec::Parallel);
  DensityMatrix binom = binomial_nonselective(rho, m, n);
  CHECK(trace_distance(gauss, binom) < 0.02);

  DensityMatrix gauss_serial =
      nseries_nonselective(rho, m, n * p.tau, cfg, Exec::Serial);
  CHECK(gauss.m == gauss_serial.m);
  DensityMatrix binom_serial =
      binomial_nonselective(rho, m, n, Exec::Serial);
  CHECK(binom.m == binom_serial.m);
}

TEST_CASE("outcome statistics: gaussian limit of the binomial distribution") {
  DerivedModel m = derive(symmetric(0.02, 0.005));
  DensityMatrix rho = DensityMatrix::from_bloch(0.0, 0.0, 0.4);

  double tv_small = binomial_vs_gaussian_tv(rho, m, 50);
  double tv_large = binomial_vs_gaussian_tv(rho, m, 200);
  CHECK(tv_large < tv_small);
  CHECK(tv_large < 0.01);

  DerivedModel still = derive(symmetric(0.0, 0.01));
  CHECK_THROWS_AS(
      binomial_vs_gaussian_tv(DensityMatrix(), still, 50),
      std::domain_error);
}
