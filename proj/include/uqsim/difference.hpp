#pragma once

// Difference equations for the coarse-grained state update over a chunk
// of n measurement periods (Delta_t = n*tau). Three update rules of
// increasing fidelity are provided, built from individually named terms
// so each can be tested for Hermiticity, tracelessness and its analytic
// action on Pauli components.
//
// All terms are rates (multiply by Delta_t for the first-order group,
// Delta_t^2 for the second-order group); the mixed-order group carries
// its own Delta_t-dependent coefficient.

#include <vector>

#include "uqsim/model.hpp"
#include "uqsim/parallel.hpp"

namespace uqsim {

enum class DiffTerm {
  Hamiltonian,          // -(i/hbar)[H + H_av, rho]
  Dephasing,            // -(gamma/8)[sz,[sz,rho]]
  BackactionDephasing,  // -(p0(1-p0)tau/(2 hbar^2))[dH,[dH,rho]]
  BackactionFriction,   // -(i delta_p/(4 hbar))[dH,{sz,rho}]
  SecondOrderCross,     // -(i gamma/(8 hbar))([sz,[sz,[H,rho]]]+[H_av,[sz,[sz,rho]]])
  SecondOrderHamiltonian,  // G rho G/hbar^2 - {G^2,rho}/(2 hbar^2), G = H+H_av
  SecondOrderDephasing,    // +(gamma^2/32)[sz,[sz,rho]]
  MixedOrderGroup,         // see mixed_order_generator
};

const char* to_string(DiffTerm term);
std::vector<DiffTerm> all_difference_terms();

// Evaluate one named generator term at rho. Every term maps Hermitian
// traceless-corrected input to a Hermitian traceless output.
CMat2 difference_term(DiffTerm term, const CMat2& rho,
                      const DerivedModel& model);

// Multiplies the bare dephasing rate in the higher-order rule; equals 1
// at p0 = 1/2 and dips slightly away from center.
double dephasing_width_factor(const DerivedModel& model);

// Real coefficient of the mixed-order group:
// -Delta_t^2 gamma/(2 hbar) + 3 Delta_t delta_p^2/(8 hbar p0 (1-p0)).
double mixed_order_coefficient(const DerivedModel& model, double delta_t);

// rho + Delta_t * (hamiltonian + dephasing).
DensityMatrix step_first_order(const DensityMatrix& rho,
                               const DerivedModel& model, double delta_t);

// Adds the unitary-backaction dephasing and friction terms.
DensityMatrix step_with_backaction(const DensityMatrix& rho,
                                   const DerivedModel& model, double delta_t);

// Full rule: width-corrected dephasing, backaction terms, the three
// Delta_t^2 terms and the mixed-order group. n is the number of
// measurement periods in the chunk; delta_t must equal n*tau.
DensityMatrix step_higher_order(const DensityMatrix& rho,
                                const DerivedModel& model, double delta_t,
                                int n);

struct ScalingPoint {
  int n = 0;
  double delta_t = 0;
  double err_first = 0;
  double err_backaction = 0;
  double err_higher = 0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  double slope_first = 0;
  double slope_backaction = 0;
  double slope_higher = 0;
};

// Local (single-chunk) error of each rule against the exact n-step
// channel, over chunk sizes n_list. Delta_t = n*tau by construction.
// Slopes are least-squares fits of log(err) vs log(Delta_t).
ScalingReport error_scaling_study(const DensityMatrix& rho0,
                                  const DerivedModel& model,
                                  const std::vector<int>& n_list,
                                  Exec policy = Exec::Parallel);

}  // namespace uqsim
