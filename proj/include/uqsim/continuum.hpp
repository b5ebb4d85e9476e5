#pragma once

// Continuous-time limit of the periodic measurement model: the
// deterministic master equation for the outcome-averaged state, the
// selective stochastic master equation driven by the continuous readout,
// and the machinery for checking that the discrete channel converges to
// them as tau -> 0 at fixed gamma.

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "uqsim/model.hpp"
#include "uqsim/parallel.hpp"
#include "uqsim/rng.hpp"

namespace uqsim {

struct ContinuumModel {
  CMat2 H_total;  // H + H_av
  double gamma = 0.0;
  double hbar = 1.0;
};

// Continuum parameters of a discrete model.
ContinuumModel continuum_limit(const DerivedModel& model);

// Rescale the measurement strength to a new period at fixed gamma, p0
// and Hamiltonians: delta_p -> sqrt(4 gamma p0 (1-p0) tau_new). Throws
// if the resulting probabilities leave [0, 1].
ModelParams scale_to_continuum(const ModelParams& base, double tau_new);

// drho/dt = -(i/hbar)[H_total, rho] - (gamma/8)[sz,[sz,rho]].
CMat2 master_rhs(const CMat2& rho, const ContinuumModel& cm);

DensityMatrix master_step_rk4(const DensityMatrix& rho,
                              const ContinuumModel& cm, double dt);

struct MasterSolution {
  std::vector<double> times;
  std::vector<DensityMatrix> states;  // includes the initial state
};

// Fixed-step RK4 integration to t_final; a shorter final step absorbs
// any remainder when dt does not divide t_final.
MasterSolution integrate_master(const DensityMatrix& rho0,
                                const ContinuumModel& cm, double t_final,
                                double dt);

// One Euler-Maruyama step of the Ito stochastic master equation
//   drho = master_rhs dt + (sqrt(gamma)/2) {sz - <sz>, rho} dW,
// followed by hermitization and trace renormalization. When readout is
// non-null and gamma > 0 it receives s = <sz> + dW/(sqrt(gamma) dt).
DensityMatrix sme_step_euler(const DensityMatrix& rho,
                             const ContinuumModel& cm, double dt, double dW,
                             double* readout = nullptr);

struct SmeOptions {
  double dt = 1e-3;
  int n_steps = 1000;
  int state_stride = 0;       // record states every this many steps; 0 = none
  bool record_noise = false;  // keep the dW sequence
  // Steps that land slightly outside the Bloch ball (unavoidable for
  // Euler noise at any dt) are projected back onto the sphere and counted
  // in n_projections. The projection rectifies boundary noise into a
  // small O(sqrt(dt)) purity bias, so convergence diagnostics can switch
  // it off and watch the signed residue instead; raw mode should widen
  // abort_eig, since free excursions below the auto tripwire are routine.
  bool project = true;
  // Divergence tripwire: an eigenvalue below this floor, or a non-finite
  // state, abandons the path. NaN selects -(1e-8 + 2*sqrt(gamma*T*dt))
  // with T = n_steps*dt.
  double abort_eig = std::numeric_limits<double>::quiet_NaN();
};

struct SmePath {
  double dt = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;           // times of recorded states
  std::vector<DensityMatrix> states;   // per state_stride
  std::vector<double> readout;         // one entry per step
  std::vector<double> noise;           // dW per step when record_noise
  DensityMatrix final_state;
  double final_purity = 0;
  double min_eig_seen = 0;             // worst pre-projection eigenvalue
  std::size_t n_projections = 0;       // steps pulled back onto the sphere
  bool aborted = false;
  int abort_step = -1;
};

SmePath sme_run_path(const DensityMatrix& rho0, const ContinuumModel& cm,
                     const SmeOptions& opt, std::uint64_t seed);

struct SmeEnsembleStats {
  std::size_t n_paths = 0;
  std::size_t n_aborted = 0;
  std::size_t n_projected_steps = 0;  // across all paths
  double dt = 0;
  std::vector<double> sample_times;
  std::vector<std::array<double, 3>> mean_bloch;
  std::array<double, 3> final_se{};  // standard error of the final mean
  DensityMatrix mean_final;
  double mean_final_purity = 0;  // ensemble mean of tr(rho^2) at the end
};

// Path-averaged SME evolution. Path i uses the stream derived from
// (master_seed, i); aborted paths are excluded from the averages.
// sample_stride 0 picks roughly 50 sample times.
SmeEnsembleStats sme_run_ensemble(const DensityMatrix& rho0,
                                  const ContinuumModel& cm,
                                  const SmeOptions& opt, std::size_t n_paths,
                                  std::uint64_t master_seed,
                                  Exec policy = Exec::Parallel,
                                  int sample_stride = 0);

// Materialize whole paths (for readout statistics and path output).
std::vector<SmePath> sme_run_paths(const DensityMatrix& rho0,
                                   const ContinuumModel& cm,
                                   const SmeOptions& opt, std::size_t n_paths,
                                   std::uint64_t master_seed,
                                   Exec policy = Exec::Parallel);

struct ReadoutStats {
  double window = 0;
  std::size_t n_windows = 0;  // complete windows across all paths
  double mean = 0;
  double variance = 0;           // across window averages
  double se_mean = 0;
  double se_variance = 0;        // ~ variance * sqrt(2/(n-1))
  double expected_variance = 0;  // 1/(gamma*window) for a frozen state
};

// Statistics of window-averaged readout over an ensemble of paths.
// Requires window >= dt and at least 100 paths.
ReadoutStats readout_statistics(const std::vector<SmePath>& paths,
                                double window, const ContinuumModel& cm);

struct ConvergencePoint {
  double tau = 0;
  double distance = 0;  // trace distance to the master endpoint
};

struct ConvergenceReport {
  std::vector<ConvergencePoint> points;
  double slope = 0;  // log-log fit, expected ~1
};

// Endpoint error of the discrete nonselective channel against the
// continuum master equation as the period shrinks at fixed gamma. Each
// tau must divide t_final to machine precision.
ConvergenceReport discrete_to_continuum_convergence(
    const ModelParams& base, const DensityMatrix& rho0,
    const std::vector<double>& tau_list, double t_final,
    Exec policy = Exec::Parallel);

}  // namespace uqsim
