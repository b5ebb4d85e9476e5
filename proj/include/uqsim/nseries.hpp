#pragma once

// Coarse-grained description of n consecutive measurement periods
// (duration Delta_t = n*tau) as a single generalized measurement.
//
// Two resolutions are provided. The binomial elements are indexed by the
// number of "+" outcomes and are exact up to the operator-reordering
// corrections bounded in check_commutator_bounds. The Gaussian elements
// replace the outcome count with a continuous readout variable s scaled
// so that the "+" rate is p0 - (delta_p/2) s; they are the de Moivre-
// Laplace limit of the binomial family and carry the readout-dependent
// unitary back-action exp(-i(H_av + s*delta_p/2 * dH) Delta_t/hbar).

#include <vector>

#include "uqsim/model.hpp"
#include "uqsim/parallel.hpp"

namespace uqsim {

// Readout grid with quadrature weights (trapezoid on a uniform grid by
// default). s is dimensionless; the natural width of the readout
// distribution is sigma_s = 1/sqrt(gamma*Delta_t) around s = +-1.
struct SGrid {
  std::vector<double> s;
  std::vector<double> w;

  // Uniform grid over [-span_sigmas*sigma_s, +span_sigmas*sigma_s].
  static SGrid uniform(double gamma, double delta_t, int points = 1601,
                       double span_sigmas = 10.0);

  double spacing() const { return s.size() > 1 ? s[1] - s[0] : 0.0; }
};

struct NSeriesConfig {
  int n_measurements = 100;
  SGrid grid;
  bool use_qnumber_width = false;  // level-resolved Gaussian widths
};

// Coverage/resolution diagnostics for a grid against a given model and
// chunk duration. resolved means the grid both covers the readout
// centers at +-1 with >= 6 sigma margin and samples sigma_s with >= 8
// points.
struct QuadratureDiag {
  double sigma_s = 0;
  double points_per_sigma = 0;
  double span = 0;                // grid half-width
  double tail_mass_estimate = 0;  // Gaussian mass beyond the grid edge
  bool resolved = false;
};

QuadratureDiag quadrature_diagnostics(const SGrid& grid,
                                      const DerivedModel& model,
                                      double delta_t);

// Kraus element for n_plus "+" outcomes out of n:
// U+^a U-^(n-a) * sqrt(C(n,a)) |M+|^a |M-|^(n-a) * exp(-i H Delta_t/hbar).
// The diagonal magnitudes are evaluated in the log domain so large n and
// extreme probabilities do not overflow.
CMat2 binomial_element(int n_plus, int n, const DerivedModel& model);

struct GaussianElement {
  double s = 0;
  CMat2 M;           // backaction * abs_part * free
  CMat2 abs_part;    // positive readout-resolved magnitude
  CMat2 backaction;  // exp(-i (H_av + s*delta_p/2 dH) Delta_t / hbar)
};

// Continuous-readout element at s. With use_qnumber_width the Gaussian
// width uses the level-resolved rates delta_p^2/(4 p_i (1-p_i) tau)
// instead of the scalar gamma. Requires gamma*Delta_t > 0 and, for the
// level-resolved width, 0 < p1, p2 < 1.
GaussianElement gaussian_element(double s, const DerivedModel& model,
                                 double delta_t,
                                 bool use_qnumber_width = false);

// s for a given outcome count, s = 2 (p0 - n_plus/n) / delta_p.
// Requires delta_p > 0 (the readout scale degenerates otherwise).
double s_from_rate(int n_plus, int n, const DerivedModel& model);

struct RateValue {
  double rate = 0;      // expected "+" fraction, p0 - (delta_p/2) s
  double count = 0;     // rate * n
  bool physical = true; // rate inside [0,1]
};

// Inverse of s_from_rate; values of s outside the physical readout range
// are returned with physical=false rather than rejected.
RateValue rate_from_s(double s, const DerivedModel& model, int n);

// Outcome-averaged chunk via the Gaussian family: quadrature of
// M_s rho M_s^dag over the grid. Deterministic fixed-order accumulation.
DensityMatrix nseries_nonselective(const DensityMatrix& rho,
                                   const DerivedModel& model, double delta_t,
                                   const NSeriesConfig& cfg,
                                   Exec policy = Exec::Parallel);

// Outcome-averaged chunk via the binomial family (sum over all counts).
DensityMatrix binomial_nonselective(const DensityMatrix& rho,
                                    const DerivedModel& model, int n,
                                    Exec policy = Exec::Parallel);

struct CompletenessReport {
  double full_grid_dev = 0;       // |quadrature of M_s^dag M_s - 1|
  double physical_range_dev = 0;  // same, restricted to physical s
};

// How close the Gaussian family comes to resolving the identity on the
// given grid. The full-grid number is a quadrature check; the
// physical-range number measures the statistical weight the Gaussian
// family assigns to unphysical readouts, which grows as p0 approaches
// 0 or 1.
CompletenessReport gaussian_completeness(const DerivedModel& model,
                                         double delta_t,
                                         const NSeriesConfig& cfg);

// Deviation of sum_a M(a,n)^dag M(a,n) from the identity.
double binomial_completeness(const DerivedModel& model, int n);

struct ReadoutMoments {
  double mean = 0;
  double variance = 0;
  double mass = 0;  // total quadrature weight, ~1 when complete
};

// Moments of the readout distribution p(s) = w tr(M_s^dag M_s rho).
ReadoutMoments readout_moments(const DensityMatrix& rho,
                               const DerivedModel& model, double delta_t,
                               const NSeriesConfig& cfg);

// Total-variation distance between the binomial outcome distribution and
// the Gaussian one evaluated on the count lattice (both for state rho).
double binomial_vs_gaussian_tv(const DensityMatrix& rho,
                               const DerivedModel& model, int n,
                               bool use_qnumber_width = false);

}  // namespace uqsim
