#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "helpers.hpp"
#include "uqsim/config.hpp"

using namespace uqsim;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() : dir(fs::temp_directory_path() / "uqsim_cfg_tests") {
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }

  std::string file(const std::string& name, const std::string& content) {
    fs::path p = dir / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& s : e.issues())
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("defaults survive an empty configuration") {
  SimulationConfig cfg = load_config("");
  CHECK(cfg.experiment == "exact");
  CHECK(cfg.params.p1 == 0.45);
  CHECK(cfg.params.p2 == 0.55);
  CHECK(cfg.n == 100);
  CHECK(cfg.delta_t == doctest::Approx(1.0).epsilon(1e-15));  // n * tau
  CHECK(cfg.seed == 12345);
  // The echo is shortest-exact only up to %.17g; parse it back instead of
  // pinning the digits.
  CHECK(std::stod(cfg.resolved.at("p1")) == 0.45);
  CHECK(cfg.resolved.at("use_qnumber_width") == "false");
  CHECK(!cfg.defaulted.empty());
  bool p1_defaulted = false;
  for (const auto& k : cfg.defaulted) p1_defaulted = p1_defaulted || k == "p1";
  CHECK(p1_defaulted);
}

TEST_CASE("config files allow comments and collect every problem at once") {
  Scratch scratch;
  std::string path = scratch.file("multi.cfg",
                                  "# a comment line\n"
                                  "experiment = master\n"
                                  "\n"
                                  "tau = abc\n"
                                  "mystery = 1\n"
                                  "this line has no equals\n"
                                  "n = 0\n");
  try {
    load_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.issues().size() == 4);
    CHECK(mentions(e, "tau: not a number"));
    CHECK(mentions(e, "line 5: unknown key 'mystery'"));
    CHECK(mentions(e, "line 6: expected key = value"));
    CHECK(mentions(e, "n: must be >= 1"));
  }

  std::string good = scratch.file("good.cfg",
                                  "experiment = master  # trailing comment\n"
                                  "p1 = 0.4\n"
                                  "p2 = 0.6\n"
                                  "tau = 0.02\n"
                                  "n = 50\n");
  SimulationConfig cfg = load_config(good);
  CHECK(cfg.experiment == "master");
  CHECK(cfg.params.p1 == 0.4);
  CHECK(cfg.delta_t == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(load_config(scratch.dir / "missing.cfg"), ConfigError);
}

TEST_CASE("probabilities can be given as center and split") {
  Scratch scratch;
  SimulationConfig cfg =
      load_config(scratch.file("p0.cfg", "p0 = 0.6\ndelta_p = 0.2\n"));
  CHECK(cfg.params.p1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cfg.params.p2 == doctest::Approx(0.7).epsilon(1e-15));

  try {
    load_config(scratch.file("conflict.cfg",
                             "p1 = 0.4\np2 = 0.6\np0 = 0.5\ndelta_p = 0.3\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "conflicting probabilities"));
  }

  // agreeing redundancy is allowed
  SimulationConfig both = load_config(scratch.file(
      "agree.cfg", "p1 = 0.4\np2 = 0.6\np0 = 0.5\ndelta_p = 0.2\n"));
  CHECK(both.params.p1 == doctest::Approx(0.4).epsilon(1e-15));

  try {
    load_config(scratch.file("half.cfg", "p0 = 0.5\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "p0 and delta_p must be given together"));
  }
}

TEST_CASE("hamiltonians enter as Pauli coefficients in units of hbar") {
  Scratch scratch;
  SimulationConfig cfg = load_config(
      scratch.file("h.cfg", "H = 0 0.5 0 0\nH_plus = 0 0 0 0.25\nhbar = 2\n"));
  CHECK(uqtest::max_diff(cfg.params.H, from_pauli(0.0, 1.0, 0.0, 0.0)) == 0.0);
  CHECK(uqtest::max_diff(cfg.params.H_plus,
                         from_pauli(0.0, 0.0, 0.0, 0.5)) == 0.0);

  try {
    load_config(scratch.file("hbad.cfg", "H = 1 2 3\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "H: expected 4 numbers, got 3"));
  }
}

TEST_CASE("chunk duration must line up with the period") {
  Scratch scratch;
  SimulationConfig cfg = load_config(
      scratch.file("dt.cfg", "tau = 0.01\ndelta_t = 0.25\n"));
  CHECK(cfg.n == 25);

  try {
    load_config(scratch.file("dt2.cfg", "tau = 0.01\ndelta_t = 0.013\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "delta_t: must be a positive integer multiple of tau"));
  }

  try {
    load_config(
        scratch.file("dt3.cfg", "tau = 0.01\ndelta_t = 0.25\nn = 10\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "delta_t and n disagree"));
  }
}

TEST_CASE("environment variables override the file, overrides beat both") {
  Scratch scratch;
  std::string path = scratch.file("env.cfg", "seed = 1\n");

  setenv("UQSIM_SEED", "777", 1);
  SimulationConfig from_env = load_config(path);
  CHECK(from_env.seed == 777);

  SimulationConfig forced = load_config(path, {{"seed", "888"}});
  CHECK(forced.seed == 888);
  unsetenv("UQSIM_SEED");

  SimulationConfig plain = load_config(path);
  CHECK(plain.seed == 1);

  CHECK_THROWS_AS(load_config(path, {{"bogus", "1"}}), ConfigError);
}

TEST_CASE("remaining scalar validations") {
  Scratch scratch;
  try {
    load_config(scratch.file("bad.cfg",
                             "experiment = warp\n"
                             "bloch = 0.9 0.9 0.9\n"
                             "s_span = 4\n"
                             "tau_list = 0.1 -0.01\n"
                             "use_qnumber_width = maybe\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "experiment: unknown value 'warp'"));
    CHECK(mentions(e, "bloch: vector leaves the Bloch ball"));
    CHECK(mentions(e, "s_span: readout grid must span at least 8 sigma"));
    CHECK(mentions(e, "tau_list: all periods must be > 0"));
    CHECK(mentions(e, "use_qnumber_width: expected true/false"));
  }

  // model-level validation is folded into the same error channel
  try {
    load_config(scratch.file("model.cfg", "p1 = 0.9\np2 = 0.1\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "p1 > p2"));
  }

  const auto& names = experiment_names();
  CHECK(names.size() == 8);
  CHECK(names.front() == "exact");
}
