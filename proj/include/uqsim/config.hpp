#pragma once

// Run configuration: plain key=value files with '#' comments, overlaid
// by UQSIM_* environment variables and then by explicit overrides (the
// CLI layer). Validation is all-at-once: every problem found is
// collected and reported together.

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "uqsim/model.hpp"

namespace uqsim {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct SimulationConfig {
  std::string experiment = "exact";
  ModelParams params;
  std::array<double, 3> bloch0{1.0, 0.0, 0.0};
  int n = 100;            // measurements per coarse-grained chunk
  double delta_t = 0;     // chunk duration; resolved to n*tau if absent
  double dt = 1e-3;       // integrator step (master / sme)
  double t_final = 1.0;
  double window = 0.1;    // readout averaging window
  std::uint64_t seed = 12345;
  std::size_t n_trajectories = 1000;
  int s_points = 1601;
  double s_span = 10.0;   // grid half-width in units of sigma_s
  bool use_qnumber_width = false;
  bool emit_paths = false;
  std::vector<double> tau_list{1e-1, 1e-2, 1e-3, 1e-4};
  std::string out_dir = "out";

  // Bookkeeping for reproducible reports.
  std::vector<std::string> defaulted;          // keys left at defaults
  std::map<std::string, std::string> resolved; // canonical key -> value
};

// Parse and validate. path may be empty (defaults only). overrides are
// applied after the file and the environment, highest precedence.
// Throws ConfigError listing every violation.
SimulationConfig load_config(
    const std::string& path,
    const std::map<std::string, std::string>& overrides = {});

// The recognized experiment names, in canonical order.
const std::vector<std::string>& experiment_names();

}  // namespace uqsim
