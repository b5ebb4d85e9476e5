#pragma once

// Experiment drivers: each named experiment runs one or more evolution
// methods on a common time grid, cross-checks them, and writes a fixed
// set of outputs under the configured directory:
//   timeseries.csv   one row per (time, method) sample
//   summary.json     config echo, checks, distances, derived numbers
//   plots/*.dat      plain-text plot data plus a manifest
// Outputs contain no timestamps or timings; identical configs produce
// byte-identical files regardless of thread count.

#include <string>
#include <vector>

#include <json.hpp>

#include "uqsim/config.hpp"
#include "uqsim/model.hpp"
#include "uqsim/parallel.hpp"

namespace uqsim {

struct BlochSample {
  double time = 0;
  double sx = 0, sy = 0, sz = 0;
  double purity = 0;
  double trace_dev = 0;
  bool has_readout = false;
  double readout = 0;
};

struct MethodSeries {
  std::string method;
  std::vector<BlochSample> samples;
  double wall_seconds = 0;  // console diagnostics only, never persisted
};

struct PairDistance {
  std::string a, b;
  std::vector<double> times;
  std::vector<double> distance;
  double max_distance = 0;
  double t_at_max = 0;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0;
  double threshold = 0;
};

struct EvolutionReport {
  std::string experiment;
  std::vector<MethodSeries> methods;
  std::vector<PairDistance> distances;
  RegimeReport regime;
  std::vector<CheckResult> checks;
  nlohmann::ordered_json extra;
};

struct ExperimentResult {
  EvolutionReport report;
  std::vector<std::string> files;  // paths written, in write order
  int exit_code = 0;               // 0 ok, 3 when a check failed
};

// Run the experiment named in cfg.experiment and write its outputs.
// Throws ConfigError for configuration problems discovered at run time
// (for example a period that does not divide t_final); on any throw the
// partially written outputs are removed first.
ExperimentResult run_experiment(const SimulationConfig& cfg,
                                Exec policy = Exec::Parallel);

// Serialization pieces, exposed so tests can pin the formats.
void write_timeseries_csv(const std::string& path,
                          const SimulationConfig& cfg,
                          const std::vector<MethodSeries>& methods);
nlohmann::ordered_json summary_json(const SimulationConfig& cfg,
                                    const EvolutionReport& report,
                                    const std::vector<std::string>& files);
std::vector<std::string> emit_plot_data(const EvolutionReport& report,
                                        const std::string& dir);

}  // namespace uqsim
