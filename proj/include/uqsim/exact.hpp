#pragma once

// Exact evolution of the measurement chain. One period applies the free
// unitary U first, then one Kraus operator M_plus or M_minus (selective)
// or their sum over outcomes (nonselective). No approximations: this is
// the oracle the coarse-grained engines are validated against.

#include <cstdint>
#include <utility>
#include <vector>

#include "uqsim/model.hpp"
#include "uqsim/parallel.hpp"
#include "uqsim/rng.hpp"

namespace uqsim {

inline constexpr int kMaxEnumerationSteps = 20;

struct StepResult {
  DensityMatrix state;
  int outcome = 0;          // +1 or -1
  double probability = 0;   // probability of the realized outcome
};

// One period of a monitored run: evolve with U, draw the outcome from a
// single uniform variate against p_plus, apply the matching Kraus
// operator and normalize. Throws std::runtime_error if the realized
// branch has probability below 1e-14.
StepResult selective_step(const DensityMatrix& rho, const DerivedModel& model,
                          RandomStream& rng);

// Deterministic branch application (same update as selective_step but
// with the outcome imposed). outcome must be +1 or -1.
StepResult apply_outcome(const DensityMatrix& rho, const DerivedModel& model,
                         int outcome);

// One period of the outcome-averaged channel:
// rho -> M+ U rho U^dag M+^dag + M- U rho U^dag M-^dag.
DensityMatrix nonselective_step(const DensityMatrix& rho,
                                const DerivedModel& model);

struct TrajectoryRecord {
  double tau = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;          // n_steps+1 entries, first is 0
  std::vector<DensityMatrix> states;  // n_steps+1 entries
  std::vector<int> outcomes;          // n_steps entries, +1/-1
  std::vector<double> probabilities;  // probability of each realized outcome
};

TrajectoryRecord run_sequence(const DensityMatrix& rho0,
                              const DerivedModel& model, int n_steps,
                              std::uint64_t seed);

// States of the outcome-averaged chain, n_steps+1 entries.
std::vector<DensityMatrix> run_nonselective(const DensityMatrix& rho0,
                                            const DerivedModel& model,
                                            int n_steps);

struct Branch {
  double weight = 0;   // tr of the unnormalized state
  CMat2 unnormalized;  // Omega rho0 Omega^dag for this outcome string
};

// All 2^n outcome strings of an n-step run. Index bit k holds the
// outcome of step k+1 (1 = "+"). Weights sum to 1.
struct BranchTable {
  int n_steps = 0;
  std::vector<Branch> branches;
  double weight_sum = 0;

  const Branch& at(std::uint32_t bits) const { return branches[bits]; }
};

// n_steps is capped at kMaxEnumerationSteps; the table grows as 2^n.
BranchTable enumerate_branches(const DensityMatrix& rho0,
                               const DerivedModel& model, int n_steps,
                               Exec policy = Exec::Parallel);

// Outcome-weighted average of the branch table (equals the nonselective
// endpoint; used as a consistency oracle).
DensityMatrix branch_average(const BranchTable& table);

struct EnsembleStats {
  int n_steps = 0;
  std::size_t n_trajectories = 0;
  std::vector<double> times;
  std::vector<std::array<double, 3>> mean_bloch;  // per step
  std::array<double, 3> final_se{};               // std error of the mean
  DensityMatrix mean_final;
};

// Mean over seeded trajectories; trajectory i uses the stream derived
// from (master_seed, i). Chunked accumulation keeps the result
// bit-identical for any thread count and for Exec::Serial.
EnsembleStats run_selective_ensemble(const DensityMatrix& rho0,
                                     const DerivedModel& model, int n_steps,
                                     std::size_t n_trajectories,
                                     std::uint64_t master_seed,
                                     Exec policy = Exec::Parallel);

struct BoundReport {
  int n_steps = 0;
  double delta_t = 0;
  double max_norm_reorder_free = 0;   // worst |C| moving all M past U
  double max_norm_reorder_sorted = 0; // worst |C| sorting the M factors
  double bound_free = 0;              // n*delta_p*dt*|H|/hbar + dt^2*|H|*max|H+-|/hbar^2
  double bound_sorted = 0;            // n*delta_p*dt*max|H+-|/hbar + dt^2*|H+|*|H-|/hbar^2
  double ratio_free = 0;              // max norm / bound (0 when both negligible)
  double ratio_sorted = 0;
  std::size_t sequences = 0;
  std::size_t skipped = 0;            // singular reordered products
};

// Measures the reordering error for every outcome string of an n-step
// chain: C is defined by exact = reordered (1 + C), so
// C = reordered^-1 exact - 1. Two reorderings are measured: commuting
// every free unitary to the right (C-free), and additionally sorting the
// Kraus factors by outcome into U+^a U-^b |M+|^a |M-|^b U^n (C-sorted).
// Each comes with its first-order bound; ratios are empirical constants.
BoundReport check_commutator_bounds(const DerivedModel& model, int n_steps,
                                    Exec policy = Exec::Parallel);

}  // namespace uqsim
