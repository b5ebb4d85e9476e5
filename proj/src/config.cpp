#include "uqsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace uqsim {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_vec(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += " ";
    out += fmt(v[i]);
  }
  return out;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "experiment", "p1",        "p2",        "p0",
      "delta_p",    "tau",       "hbar",      "H",
      "H_plus",     "H_minus",   "bloch",     "n",
      "delta_t",    "dt",        "t_final",   "window",
      "seed",       "n_trajectories",         "s_points",
      "s_span",     "use_qnumber_width",      "emit_paths",
      "tau_list",   "out_dir"};
  return keys;
}

struct Parser {
  std::map<std::string, std::string> raw;
  std::vector<std::string> issues;

  bool has(const std::string& k) const { return raw.count(k) != 0; }

  bool parse_double(const std::string& k, double& out) {
    auto it = raw.find(k);
    if (it == raw.end()) return false;
    const char* s = it->second.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0') {
      issues.push_back(k + ": not a number ('" + it->second + "')");
      return false;
    }
    out = v;
    return true;
  }

  bool parse_int(const std::string& k, int& out) {
    auto it = raw.find(k);
    if (it == raw.end()) return false;
    const char* s = it->second.c_str();
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (end == s || *end != '\0') {
      issues.push_back(k + ": not an integer ('" + it->second + "')");
      return false;
    }
    out = static_cast<int>(v);
    return true;
  }

  bool parse_u64(const std::string& k, std::uint64_t& out) {
    auto it = raw.find(k);
    if (it == raw.end()) return false;
    const char* s = it->second.c_str();
    char* end = nullptr;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') {
      issues.push_back(k + ": not an unsigned integer ('" + it->second + "')");
      return false;
    }
    out = v;
    return true;
  }

  bool parse_size(const std::string& k, std::size_t& out) {
    std::uint64_t v = 0;
    if (!parse_u64(k, v)) return false;
    out = static_cast<std::size_t>(v);
    return true;
  }

  bool parse_bool(const std::string& k, bool& out) {
    auto it = raw.find(k);
    if (it == raw.end()) return false;
    const std::string& v = it->second;
    if (v == "true" || v == "1") {
      out = true;
      return true;
    }
    if (v == "false" || v == "0") {
      out = false;
      return true;
    }
    issues.push_back(k + ": expected true/false ('" + v + "')");
    return false;
  }

  bool parse_vec(const std::string& k, std::vector<double>& out,
                 int expected = -1) {
    auto it = raw.find(k);
    if (it == raw.end()) return false;
    std::istringstream in(it->second);
    std::vector<double> v;
    std::string tok;
    bool ok = true;
    while (in >> tok) {
      const char* s = tok.c_str();
      char* end = nullptr;
      double x = std::strtod(s, &end);
      if (end == s || *end != '\0') {
        issues.push_back(k + ": not a number ('" + tok + "')");
        ok = false;
        break;
      }
      v.push_back(x);
    }
    if (!ok) return false;
    if (expected >= 0 && static_cast<int>(v.size()) != expected) {
      issues.push_back(k + ": expected " + std::to_string(expected) +
                       " numbers, got " + std::to_string(v.size()));
      return false;
    }
    if (v.empty()) {
      issues.push_back(k + ": empty value");
      return false;
    }
    out = std::move(v);
    return true;
  }
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&problems] {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        return msg;
      }()),
      issues_(std::move(problems)) {}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "exact", "nseries", "difference", "master",
      "sme",   "compare", "converge",   "bounds"};
  return names;
}

SimulationConfig load_config(
    const std::string& path,
    const std::map<std::string, std::string>& overrides) {
  Parser ps;

  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string stripped = line;
      std::size_t hash = stripped.find('#');
      if (hash != std::string::npos) stripped = stripped.substr(0, hash);
      stripped = trim(stripped);
      if (stripped.empty()) continue;
      std::size_t eq = stripped.find('=');
      if (eq == std::string::npos) {
        ps.issues.push_back("line " + std::to_string(lineno) +
                            ": expected key = value");
        continue;
      }
      std::string key = trim(stripped.substr(0, eq));
      std::string value = trim(stripped.substr(eq + 1));
      bool known = false;
      for (const auto& k : known_keys()) known = known || k == key;
      if (!known) {
        ps.issues.push_back("line " + std::to_string(lineno) +
                            ": unknown key '" + key + "'");
        continue;
      }
      ps.raw[key] = value;
    }
  }

  for (const auto& key : known_keys()) {
    std::string env = "UQSIM_";
    for (char c : key) env += static_cast<char>(std::toupper(c));
    if (const char* v = std::getenv(env.c_str())) ps.raw[key] = v;
  }

  for (const auto& [key, value] : overrides) {
    bool known = false;
    for (const auto& k : known_keys()) known = known || k == key;
    if (!known) {
      ps.issues.push_back("override: unknown key '" + key + "'");
      continue;
    }
    ps.raw[key] = value;
  }

  SimulationConfig cfg;

  if (ps.has("experiment")) {
    cfg.experiment = ps.raw["experiment"];
    bool ok = false;
    for (const auto& name : experiment_names()) ok = ok || name == cfg.experiment;
    if (!ok) {
      std::string valid;
      for (const auto& name : experiment_names()) valid += " " + name;
      ps.issues.push_back("experiment: unknown value '" + cfg.experiment +
                          "' (one of" + valid + ")");
    }
  }

  // Measurement probabilities: (p1, p2) or (p0, delta_p); both groups
  // together must agree.
  bool has_p12 = ps.has("p1") || ps.has("p2");
  bool has_p0d = ps.has("p0") || ps.has("delta_p");
  double p1 = cfg.params.p1, p2 = cfg.params.p2;
  if (has_p12) {
    if (!ps.has("p1") || !ps.has("p2"))
      ps.issues.push_back("p1 and p2 must be given together");
    ps.parse_double("p1", p1);
    ps.parse_double("p2", p2);
  }
  if (has_p0d) {
    if (!ps.has("p0") || !ps.has("delta_p"))
      ps.issues.push_back("p0 and delta_p must be given together");
    double p0 = 0.5, dp = 0;
    bool ok = ps.parse_double("p0", p0);
    ok = ps.parse_double("delta_p", dp) && ok;
    if (ok) {
      double q1 = p0 - 0.5 * dp, q2 = p0 + 0.5 * dp;
      if (has_p12 &&
          (std::abs(q1 - p1) > 1e-12 || std::abs(q2 - p2) > 1e-12)) {
        ps.issues.push_back(
            "conflicting probabilities: (p1, p2) disagrees with (p0, delta_p)");
      } else if (!has_p12) {
        p1 = q1;
        p2 = q2;
      }
    }
  }
  cfg.params.p1 = p1;
  cfg.params.p2 = p2;

  ps.parse_double("tau", cfg.params.tau);
  ps.parse_double("hbar", cfg.params.hbar);

  std::vector<double> hv{0, 0, 0, 0}, hpv{0, 0, 0, 0}, hmv{0, 0, 0, 0};
  ps.parse_vec("H", hv, 4);
  ps.parse_vec("H_plus", hpv, 4);
  ps.parse_vec("H_minus", hmv, 4);

  std::vector<double> bl{cfg.bloch0[0], cfg.bloch0[1], cfg.bloch0[2]};
  if (ps.parse_vec("bloch", bl, 3)) {
    double r = std::sqrt(bl[0] * bl[0] + bl[1] * bl[1] + bl[2] * bl[2]);
    if (r > 1.0 + 1e-12)
      ps.issues.push_back("bloch: vector leaves the Bloch ball (|r| = " +
                          fmt(r) + ")");
    else
      cfg.bloch0 = {bl[0], bl[1], bl[2]};
  }

  ps.parse_int("n", cfg.n);
  if (cfg.n < 1) ps.issues.push_back("n: must be >= 1");

  bool has_delta_t = ps.parse_double("delta_t", cfg.delta_t);
  ps.parse_double("dt", cfg.dt);
  if (!(cfg.dt > 0)) ps.issues.push_back("dt: must be > 0");
  ps.parse_double("t_final", cfg.t_final);
  if (!(cfg.t_final > 0)) ps.issues.push_back("t_final: must be > 0");
  ps.parse_double("window", cfg.window);
  if (!(cfg.window > 0)) ps.issues.push_back("window: must be > 0");
  ps.parse_u64("seed", cfg.seed);
  ps.parse_size("n_trajectories", cfg.n_trajectories);
  ps.parse_int("s_points", cfg.s_points);
  if (cfg.s_points < 2) ps.issues.push_back("s_points: must be >= 2");
  ps.parse_double("s_span", cfg.s_span);
  if (!(cfg.s_span >= 8.0))
    ps.issues.push_back("s_span: readout grid must span at least 8 sigma");
  ps.parse_bool("use_qnumber_width", cfg.use_qnumber_width);
  ps.parse_bool("emit_paths", cfg.emit_paths);
  ps.parse_vec("tau_list", cfg.tau_list);
  for (double tau : cfg.tau_list)
    if (!(tau > 0)) {
      ps.issues.push_back("tau_list: all periods must be > 0");
      break;
    }
  if (ps.has("out_dir")) cfg.out_dir = ps.raw["out_dir"];
  if (cfg.out_dir.empty()) ps.issues.push_back("out_dir: must not be empty");

  // Hamiltonians are given as Pauli coefficients in units of hbar per
  // unit time; build the matrices once hbar is final.
  if (!(cfg.params.tau > 0)) {
    ps.issues.push_back("tau: must be > 0");
  } else {
    cfg.params.H =
        cfg.params.hbar * from_pauli(hv[0], hv[1], hv[2], hv[3]);
    cfg.params.H_plus =
        cfg.params.hbar * from_pauli(hpv[0], hpv[1], hpv[2], hpv[3]);
    cfg.params.H_minus =
        cfg.params.hbar * from_pauli(hmv[0], hmv[1], hmv[2], hmv[3]);

    if (has_delta_t) {
      long long k = std::llround(cfg.delta_t / cfg.params.tau);
      if (k < 1 ||
          std::abs(k * cfg.params.tau - cfg.delta_t) >
              1e-9 * std::max(1.0, cfg.delta_t)) {
        ps.issues.push_back(
            "delta_t: must be a positive integer multiple of tau");
      } else if (ps.has("n") && k != cfg.n) {
        ps.issues.push_back("delta_t and n disagree (delta_t != n*tau)");
      } else {
        cfg.n = static_cast<int>(k);
      }
    } else {
      cfg.delta_t = cfg.n * cfg.params.tau;
    }
  }

  if (ps.issues.empty()) {
    try {
      derive(cfg.params);
    } catch (const std::exception& e) {
      ps.issues.push_back(e.what());
    }
  }

  if (!ps.issues.empty()) throw ConfigError(std::move(ps.issues));

  for (const auto& key : known_keys()) {
    if (key == "p0" || key == "delta_p") continue;  // echoed via p1/p2
    if (!ps.has(key) && !(key == "p1" && has_p0d) && !(key == "p2" && has_p0d))
      cfg.defaulted.push_back(key);
  }
  cfg.resolved["experiment"] = cfg.experiment;
  cfg.resolved["p1"] = fmt(cfg.params.p1);
  cfg.resolved["p2"] = fmt(cfg.params.p2);
  cfg.resolved["tau"] = fmt(cfg.params.tau);
  cfg.resolved["hbar"] = fmt(cfg.params.hbar);
  cfg.resolved["H"] = fmt_vec(hv);
  cfg.resolved["H_plus"] = fmt_vec(hpv);
  cfg.resolved["H_minus"] = fmt_vec(hmv);
  cfg.resolved["bloch"] =
      fmt_vec({cfg.bloch0[0], cfg.bloch0[1], cfg.bloch0[2]});
  cfg.resolved["n"] = std::to_string(cfg.n);
  cfg.resolved["delta_t"] = fmt(cfg.delta_t);
  cfg.resolved["dt"] = fmt(cfg.dt);
  cfg.resolved["t_final"] = fmt(cfg.t_final);
  cfg.resolved["window"] = fmt(cfg.window);
  cfg.resolved["seed"] = std::to_string(cfg.seed);
  cfg.resolved["n_trajectories"] = std::to_string(cfg.n_trajectories);
  cfg.resolved["s_points"] = std::to_string(cfg.s_points);
  cfg.resolved["s_span"] = fmt(cfg.s_span);
  cfg.resolved["use_qnumber_width"] = cfg.use_qnumber_width ? "true" : "false";
  cfg.resolved["emit_paths"] = cfg.emit_paths ? "true" : "false";
  cfg.resolved["tau_list"] = fmt_vec(cfg.tau_list);
  cfg.resolved["out_dir"] = cfg.out_dir;
  return cfg;
}

}  // namespace uqsim
