#pragma once

// Two-outcome unsharp measurement interleaved with free evolution.
//
// Basis convention: index 1 is the first component, sigma_z = diag(1,-1).
// p1 and p2 are the probabilities of the "+" outcome when the system sits
// in the first/second basis state, tau is the measurement period, H is
// the free Hamiltonian, and H_plus / H_minus generate the unitary
// back-action attached to each outcome.

#include <string>
#include <utility>
#include <vector>

#include "uqsim/mat2.hpp"

namespace uqsim {

struct ModelParams {
  double p1 = 0.45;
  double p2 = 0.55;
  double tau = 0.01;
  double hbar = 1.0;
  CMat2 H = zero();
  CMat2 H_plus = zero();
  CMat2 H_minus = zero();
};

// Quantities derived once per model and shared by every engine.
struct DerivedModel {
  ModelParams params;
  double p0 = 0;       // (p1+p2)/2
  double delta_p = 0;  // p2-p1 >= 0
  double gamma = 0;    // delta_p^2/(4 p0 (1-p0) tau); 0 when delta_p = 0
  CMat2 M_plus_abs;    // diag(sqrt(p1), sqrt(p2))
  CMat2 M_minus_abs;   // diag(sqrt(1-p1), sqrt(1-p2))
  CMat2 E_plus;        // |M+|^2 = p0 I - (delta_p/2) sigma_z
  CMat2 E_minus;       // |M-|^2
  CMat2 U;             // exp(-i H tau/hbar)
  CMat2 U_plus;        // exp(-i H+ tau/hbar)
  CMat2 U_minus;       // exp(-i H- tau/hbar)
  CMat2 M_plus;        // U+ |M+|
  CMat2 M_minus;       // U- |M-|
  CMat2 H_av;          // p0 H+ + (1-p0) H-
  CMat2 delta_H;       // H- - H+
  double norm_H = 0, norm_H_plus = 0, norm_H_minus = 0;
};

// Validates the parameters (0 <= p1 <= p2 <= 1, tau > 0, hbar > 0,
// Hermitian generators) and precomputes the derived operators. Throws
// std::invalid_argument listing every violation.
DerivedModel derive(const ModelParams& params);

// (p_plus, p_minus) for a measurement applied to rho as-is (any free
// evolution must already have been applied by the caller). Clamped to
// [0,1] against roundoff.
std::pair<double, double> outcome_probabilities(const DensityMatrix& rho,
                                                const DerivedModel& model);

enum class RegimeStatus { Pass, Warn, Violated };

struct RegimeQuantity {
  std::string name;
  double value = 0;
  RegimeStatus status = RegimeStatus::Pass;
};

struct RegimeReport {
  std::vector<RegimeQuantity> items;
  bool any_warn = false;
  bool any_violated = false;
};

// Dimensionless smallness parameters behind the coarse-grained step of n
// measurements (duration n*tau): 1/n, n*delta_p, n*tau*||H||/hbar and
// n*tau*max(||H+||,||H-||)/hbar. Advisory only; thresholds 0.1 (warn)
// and 0.5 (violated).
RegimeReport check_regime(const DerivedModel& model, int n_per_chunk);

const char* to_string(RegimeStatus s);

}  // namespace uqsim
