#include <chrono>
#include <cstdio>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "uqsim/config.hpp"
#include "uqsim/experiments.hpp"
#include "uqsim/version.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::string out_dir;
  std::string seed;
  int threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* sub, CliState& st) {
  sub->add_option("--config", st.config_path, "key=value configuration file")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", st.out_dir, "output directory");
  sub->add_option("--seed", st.seed, "master RNG seed (unsigned 64-bit)");
  sub->add_option("--threads", st.threads,
                  "OpenMP thread count (0 = library default)");
  sub->add_flag("--quiet", st.quiet, "suppress non-error console output");
}

void print_report(const uqsim::ExperimentResult& res, double wall_s) {
  const uqsim::EvolutionReport& rep = res.report;
  std::printf("experiment: %s (%.2fs)\n", rep.experiment.c_str(), wall_s);
  for (const auto& q : rep.regime.items)
    std::printf("  regime %-18s %-9s %.6g\n", q.name.c_str(),
                uqsim::to_string(q.status), q.value);
  for (const auto& c : rep.checks)
    std::printf("  check  %-34s %s  value=%.6g threshold=%.6g\n",
                c.name.c_str(), c.passed ? "PASS" : "FAIL", c.value,
                c.threshold);
  for (const auto& d : rep.distances)
    std::printf("  distance %s vs %s: max %.6g at t=%.6g\n", d.a.c_str(),
                d.b.c_str(), d.max_distance, d.t_at_max);
  for (const auto& f : res.files) std::printf("  wrote %s\n", f.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-qubit periodic unsharp measurement simulator"};
  app.set_version_flag("--version", uqsim::kVersion);
  app.require_subcommand(1);

  std::map<std::string, std::pair<CLI::App*, CliState>> subs;
  const std::map<std::string, std::string> desc = {
      {"exact", "exact repeated-measurement channel and trajectory ensemble"},
      {"nseries", "coarse-grained n-measurement chunk (binomial / Gaussian)"},
      {"difference", "difference-equation updates vs the exact channel"},
      {"master", "continuum master equation"},
      {"sme", "stochastic master equation ensemble"},
      {"compare", "all evolution methods side by side"},
      {"converge", "discrete-to-continuum endpoint convergence"},
      {"bounds", "operator-reordering error bounds"},
  };
  for (const auto& name : uqsim::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, desc.at(name));
    auto& slot = subs[name];
    slot.first = sub;
    add_common(sub, slot.second);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string chosen;
  for (auto& [name, slot] : subs)
    if (slot.first->parsed()) chosen = name;
  CliState& st = subs[chosen].second;

  if (st.threads > 0) omp_set_num_threads(st.threads);

  try {
    std::map<std::string, std::string> overrides;
    overrides["experiment"] = chosen;
    if (!st.seed.empty()) overrides["seed"] = st.seed;
    if (!st.out_dir.empty()) overrides["out_dir"] = st.out_dir;
    uqsim::SimulationConfig cfg = uqsim::load_config(st.config_path, overrides);

    auto t0 = std::chrono::steady_clock::now();
    uqsim::ExperimentResult res = uqsim::run_experiment(cfg);
    double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    if (!st.quiet) print_report(res, wall_s);
    if (res.exit_code != 0)
      for (const auto& c : res.report.checks)
        if (!c.passed)
          std::fprintf(stderr, "FAILED check %s: value=%.6g threshold=%.6g\n",
                       c.name.c_str(), c.value, c.threshold);
    return res.exit_code;
  } catch (const uqsim::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid arguments: %s\n", e.what());
    return 1;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "invalid arguments: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
}
