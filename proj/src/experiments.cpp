#include "uqsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "uqsim/continuum.hpp"
#include "uqsim/difference.hpp"
#include "uqsim/exact.hpp"
#include "uqsim/nseries.hpp"
#include "uqsim/version.hpp"

namespace uqsim {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

BlochSample sample_from(double t, const DensityMatrix& rho) {
  auto b = rho.bloch();
  BlochSample s;
  s.time = t;
  s.sx = b[0];
  s.sy = b[1];
  s.sz = b[2];
  s.purity = rho.purity();
  s.trace_dev = rho.trace_dev();
  return s;
}

BlochSample sample_from_bloch(double t, const std::array<double, 3>& b) {
  BlochSample s;
  s.time = t;
  s.sx = b[0];
  s.sy = b[1];
  s.sz = b[2];
  s.purity = 0.5 * (1.0 + b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  s.trace_dev = 0.0;
  return s;
}

// Evenly strided index subset including both endpoints; keeps file sizes
// bounded for long runs.
std::vector<std::size_t> sample_indices(std::size_t count,
                                        std::size_t max_rows = 1001) {
  std::vector<std::size_t> idx;
  if (count == 0) return idx;
  std::size_t stride = count > max_rows ? (count + max_rows - 2) / (max_rows - 1)
                                        : 1;
  for (std::size_t i = 0; i < count; i += stride) idx.push_back(i);
  if (idx.back() != count - 1) idx.push_back(count - 1);
  return idx;
}

MethodSeries series_from(const std::string& name,
                         const std::vector<double>& times,
                         const std::vector<DensityMatrix>& states) {
  MethodSeries ms;
  ms.method = name;
  auto idx = sample_indices(states.size());
  ms.samples.reserve(idx.size());
  for (std::size_t i : idx) ms.samples.push_back(sample_from(times[i], states[i]));
  return ms;
}

// Trace distance between unit-trace qubit states is half the Euclidean
// distance of their Bloch vectors; the series carry exactly that data.
PairDistance distance_series(const MethodSeries& a, const MethodSeries& b) {
  PairDistance pd;
  pd.a = a.method;
  pd.b = b.method;
  std::size_t n = std::min(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < n; ++i) {
    const BlochSample& x = a.samples[i];
    const BlochSample& y = b.samples[i];
    if (std::abs(x.time - y.time) > 1e-9 * std::max(1.0, std::abs(x.time)))
      throw std::logic_error("distance_series: mismatched time grids");
    double dx = x.sx - y.sx, dy = x.sy - y.sy, dz = x.sz - y.sz;
    double d = 0.5 * std::sqrt(dx * dx + dy * dy + dz * dz);
    pd.times.push_back(x.time);
    pd.distance.push_back(d);
    if (d > pd.max_distance) {
      pd.max_distance = d;
      pd.t_at_max = x.time;
    }
  }
  return pd;
}

long long checked_multiple(double total, double part, const char* what) {
  long long k = std::llround(total / part);
  if (k < 1 || std::abs(k * part - total) > 1e-9 * std::max(1.0, total))
    throw ConfigError({std::string(what)});
  return k;
}

std::string build_timeseries_csv(const SimulationConfig& cfg,
                                 const std::vector<MethodSeries>& methods) {
  std::ostringstream out;
  out << "# uqsim timeseries schema=" << kSummarySchemaVersion << "\n";
  for (const auto& [k, v] : cfg.resolved) out << "# " << k << "=" << v << "\n";
  out << "time,method,sx,sy,sz,purity,trace_dev,readout\n";
  for (const MethodSeries& ms : methods) {
    for (const BlochSample& s : ms.samples) {
      out << fmt(s.time) << ',' << ms.method << ',' << fmt(s.sx) << ','
          << fmt(s.sy) << ',' << fmt(s.sz) << ',' << fmt(s.purity) << ','
          << fmt(s.trace_dev) << ',';
      if (s.has_readout) out << fmt(s.readout);
      out << "\n";
    }
  }
  return out.str();
}

struct PlotFile {
  std::string name;
  std::string description;
  std::string content;
};

std::vector<PlotFile> build_plot_files(const EvolutionReport& rep) {
  std::vector<PlotFile> files;
  for (const MethodSeries& ms : rep.methods) {
    std::ostringstream b, p;
    b << "# time sx sy sz\n";
    p << "# time purity\n";
    for (const BlochSample& s : ms.samples) {
      b << fmt(s.time) << ' ' << fmt(s.sx) << ' ' << fmt(s.sy) << ' '
        << fmt(s.sz) << "\n";
      p << fmt(s.time) << ' ' << fmt(s.purity) << "\n";
    }
    files.push_back({"bloch_" + ms.method + ".dat",
                     "Bloch components vs time (" + ms.method + ")",
                     b.str()});
    files.push_back({"purity_" + ms.method + ".dat",
                     "Purity vs time (" + ms.method + ")", p.str()});
  }
  for (const PairDistance& pd : rep.distances) {
    std::ostringstream o;
    o << "# time trace_distance\n";
    for (std::size_t i = 0; i < pd.times.size(); ++i)
      o << fmt(pd.times[i]) << ' ' << fmt(pd.distance[i]) << "\n";
    files.push_back({"distance_" + pd.a + "_vs_" + pd.b + ".dat",
                     "Trace distance " + pd.a + " vs " + pd.b, o.str()});
  }
  if (rep.extra.contains("scaling")) {
    std::ostringstream o;
    o << "# delta_t err_first err_backaction err_higher\n";
    for (const auto& pt : rep.extra["scaling"]["points"])
      o << fmt(pt["delta_t"].get<double>()) << ' '
        << fmt(pt["err_first"].get<double>()) << ' '
        << fmt(pt["err_backaction"].get<double>()) << ' '
        << fmt(pt["err_higher"].get<double>()) << "\n";
    files.push_back(
        {"scaling.dat", "Single-chunk error vs chunk duration", o.str()});
  }
  if (rep.extra.contains("convergence")) {
    std::ostringstream o;
    o << "# tau trace_distance\n";
    for (const auto& pt : rep.extra["convergence"]["points"])
      o << fmt(pt["tau"].get<double>()) << ' '
        << fmt(pt["distance"].get<double>()) << "\n";
    files.push_back({"convergence.dat",
                     "Endpoint distance to the continuum limit vs period",
                     o.str()});
  }
  if (rep.extra.contains("readout_hist")) {
    std::ostringstream o;
    o << "# bin_left bin_right count\n";
    const auto& h = rep.extra["readout_hist"];
    const auto& edges = h["edges"];
    const auto& counts = h["counts"];
    for (std::size_t i = 0; i < counts.size(); ++i)
      o << fmt(edges[i].get<double>()) << ' '
        << fmt(edges[i + 1].get<double>()) << ' '
        << counts[i].get<std::size_t>() << "\n";
    files.push_back(
        {"readout_hist.dat", "Histogram of window-averaged readout", o.str()});
  }
  if (rep.extra.contains("bounds")) {
    const auto& b = rep.extra["bounds"];
    std::ostringstream o;
    o << "# reordering norm bound ratio\n";
    o << "free " << fmt(b["max_norm_reorder_free"].get<double>()) << ' '
      << fmt(b["bound_free"].get<double>()) << ' '
      << fmt(b["ratio_free"].get<double>()) << "\n";
    o << "sorted " << fmt(b["max_norm_reorder_sorted"].get<double>()) << ' '
      << fmt(b["bound_sorted"].get<double>()) << ' '
      << fmt(b["ratio_sorted"].get<double>()) << "\n";
    files.push_back(
        {"bounds.dat", "Reordering errors against first-order bounds",
         o.str()});
  }
  return files;
}

// All-sample state checks shared by every experiment.
void add_state_checks(EvolutionReport& rep) {
  for (const MethodSeries& ms : rep.methods) {
    double max_trace_dev = 0, max_purity = 0;
    for (const BlochSample& s : ms.samples) {
      max_trace_dev = std::max(max_trace_dev, s.trace_dev);
      max_purity = std::max(max_purity, s.purity);
    }
    rep.checks.push_back({"trace_preserved:" + ms.method,
                          max_trace_dev <= 1e-9, max_trace_dev, 1e-9});
    rep.checks.push_back({"purity_bounded:" + ms.method,
                          max_purity <= 1.0 + 1e-9, max_purity, 1.0 + 1e-9});
  }
}

std::vector<DensityMatrix> master_at_boundaries(const DensityMatrix& rho0,
                                                const ContinuumModel& cm,
                                                long long n_chunks,
                                                double delta_t, double dt) {
  std::vector<DensityMatrix> states;
  states.reserve(n_chunks + 1);
  states.push_back(rho0);
  int sub = std::max(1LL, std::llround(std::ceil(delta_t / dt)));
  double h = delta_t / sub;
  for (long long k = 0; k < n_chunks; ++k) {
    DensityMatrix rho = states.back();
    for (int j = 0; j < sub; ++j) rho = master_step_rk4(rho, cm, h);
    states.push_back(rho);
  }
  return states;
}

std::vector<double> boundary_times(long long n_chunks, double delta_t) {
  std::vector<double> t(n_chunks + 1);
  for (long long k = 0; k <= n_chunks; ++k) t[k] = k * delta_t;
  return t;
}

// Exact channel sampled at chunk boundaries.
std::vector<DensityMatrix> exact_at_boundaries(const DensityMatrix& rho0,
                                               const DerivedModel& model,
                                               long long n_chunks, int n) {
  auto all = run_nonselective(rho0, model,
                              static_cast<int>(n_chunks) * n);
  std::vector<DensityMatrix> out;
  out.reserve(n_chunks + 1);
  for (long long k = 0; k <= n_chunks; ++k) out.push_back(all[k * n]);
  return out;
}

json scaling_json(const ScalingReport& sr) {
  json pts = json::array();
  for (const ScalingPoint& pt : sr.points) {
    pts.push_back({{"n", pt.n},
                   {"delta_t", pt.delta_t},
                   {"err_first", pt.err_first},
                   {"err_backaction", pt.err_backaction},
                   {"err_higher", pt.err_higher}});
  }
  return {{"points", pts},
          {"slope_first", sr.slope_first},
          {"slope_backaction", sr.slope_backaction},
          {"slope_higher", sr.slope_higher}};
}

}  // namespace

void write_timeseries_csv(const std::string& path,
                          const SimulationConfig& cfg,
                          const std::vector<MethodSeries>& methods) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << build_timeseries_csv(cfg, methods);
}

nlohmann::ordered_json summary_json(const SimulationConfig& cfg,
                                    const EvolutionReport& report,
                                    const std::vector<std::string>& files) {
  json j;
  j["schema"] = "uqsim-summary";
  j["schema_version"] = kSummarySchemaVersion;
  j["generator"] = {{"name", "uqsim"}, {"version", kVersion}};
  j["experiment"] = report.experiment;
  json cfgj = json::object();
  for (const auto& [k, v] : cfg.resolved) cfgj[k] = v;
  j["config"] = cfgj;
  j["defaulted"] = cfg.defaulted;
  json items = json::array();
  for (const RegimeQuantity& q : report.regime.items)
    items.push_back(
        {{"name", q.name}, {"value", q.value}, {"status", to_string(q.status)}});
  j["regime"] = {{"items", items},
                 {"any_warn", report.regime.any_warn},
                 {"any_violated", report.regime.any_violated}};
  json methods = json::array();
  for (const MethodSeries& ms : report.methods) methods.push_back(ms.method);
  j["methods"] = methods;
  json checks = json::array();
  bool all_passed = true;
  for (const CheckResult& c : report.checks) {
    all_passed = all_passed && c.passed;
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", c.value},
                      {"threshold", c.threshold}});
  }
  j["checks"] = checks;
  j["all_checks_passed"] = all_passed;
  json dists = json::array();
  for (const PairDistance& pd : report.distances)
    dists.push_back({{"a", pd.a},
                     {"b", pd.b},
                     {"max", pd.max_distance},
                     {"t_at_max", pd.t_at_max}});
  j["distances"] = dists;
  j["extra"] = report.extra.is_null() ? json::object() : report.extra;
  j["files"] = files;
  return j;
}

std::vector<std::string> emit_plot_data(const EvolutionReport& report,
                                        const std::string& dir) {
  fs::create_directories(dir);
  auto plots = build_plot_files(report);
  std::vector<std::string> written;
  std::ostringstream manifest;
  for (const PlotFile& pf : plots) {
    std::string path = dir + "/" + pf.name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << pf.content;
    written.push_back(path);
    manifest << pf.name << "  " << pf.description << "\n";
  }
  std::string mpath = dir + "/manifest.txt";
  std::ofstream mout(mpath);
  if (!mout) throw std::runtime_error("cannot write " + mpath);
  mout << manifest.str();
  written.push_back(mpath);
  return written;
}

ExperimentResult run_experiment(const SimulationConfig& cfg, Exec policy) {
  ExperimentResult res;
  EvolutionReport& rep = res.report;
  rep.experiment = cfg.experiment;
  rep.extra = json::object();

  DerivedModel model = derive(cfg.params);
  DensityMatrix rho0 =
      DensityMatrix::from_bloch(cfg.bloch0[0], cfg.bloch0[1], cfg.bloch0[2]);
  rep.regime = check_regime(model, cfg.n);

  if (cfg.experiment == "exact") {
    long long n_total = checked_multiple(
        cfg.t_final, cfg.params.tau, "t_final must be a multiple of tau");
    if (n_total > 10'000'000)
      throw ConfigError({"t_final/tau too large (> 1e7 steps)"});
    auto states = run_nonselective(rho0, model, static_cast<int>(n_total));
    std::vector<double> times(states.size());
    for (std::size_t i = 0; i < times.size(); ++i)
      times[i] = static_cast<double>(i) * cfg.params.tau;
    rep.methods.push_back(series_from("exact", times, states));
    if (cfg.n_trajectories >= 2) {
      EnsembleStats es = run_selective_ensemble(rho0, model,
                                                static_cast<int>(n_total),
                                                cfg.n_trajectories, cfg.seed,
                                                policy);
      MethodSeries ms;
      ms.method = "ensemble_mean";
      for (std::size_t i : sample_indices(es.mean_bloch.size()))
        ms.samples.push_back(sample_from_bloch(es.times[i], es.mean_bloch[i]));
      rep.methods.push_back(std::move(ms));
      rep.distances.push_back(
          distance_series(rep.methods[0], rep.methods[1]));
      auto exact_end = states.back().bloch();
      auto mean_end = es.mean_bloch.back();
      double worst = 0;
      for (int d = 0; d < 3; ++d) {
        double dev = std::abs(mean_end[d] - exact_end[d]) /
                     std::max(es.final_se[d], 1e-15);
        worst = std::max(worst, dev);
      }
      rep.checks.push_back(
          {"ensemble_matches_channel", worst <= 5.0, worst, 5.0});
      rep.extra["ensemble"] = {
          {"n_trajectories", cfg.n_trajectories},
          {"final_se", {es.final_se[0], es.final_se[1], es.final_se[2]}},
          {"max_final_dev_in_se", worst}};
    }
  } else if (cfg.experiment == "nseries") {
    if (model.delta_p == 0)
      throw ConfigError({"nseries requires delta_p > 0"});
    long long k = checked_multiple(
        cfg.t_final, cfg.delta_t, "t_final must be a multiple of delta_t");
    SGrid grid =
        SGrid::uniform(model.gamma, cfg.delta_t, cfg.s_points, cfg.s_span);
    NSeriesConfig nc{cfg.n, grid, cfg.use_qnumber_width};
    auto times = boundary_times(k, cfg.delta_t);
    rep.methods.push_back(series_from(
        "exact", times, exact_at_boundaries(rho0, model, k, cfg.n)));
    std::vector<DensityMatrix> gauss{rho0}, binom{rho0};
    for (long long i = 0; i < k; ++i) {
      gauss.push_back(
          nseries_nonselective(gauss.back(), model, cfg.delta_t, nc, policy));
      binom.push_back(binomial_nonselective(binom.back(), model, cfg.n, policy));
    }
    rep.methods.push_back(series_from("gaussian_chunk", times, gauss));
    rep.methods.push_back(series_from("binomial_chunk", times, binom));
    rep.distances.push_back(distance_series(rep.methods[0], rep.methods[1]));
    rep.distances.push_back(distance_series(rep.methods[0], rep.methods[2]));

    double bc = binomial_completeness(model, cfg.n);
    double bc_tol = std::max(1e-12, cfg.n * 5e-15);
    rep.checks.push_back({"binomial_completeness", bc <= bc_tol, bc, bc_tol});
    CompletenessReport cr = gaussian_completeness(model, cfg.delta_t, nc);
    if (model.p0 >= 0.2 && model.p0 <= 0.8)
      rep.checks.push_back({"gaussian_completeness_grid",
                            cr.full_grid_dev <= 2e-6, cr.full_grid_dev, 2e-6});
    QuadratureDiag qd = quadrature_diagnostics(grid, model, cfg.delta_t);
    rep.checks.push_back({"readout_grid_resolved", qd.resolved,
                          qd.points_per_sigma, 8.0});
    ReadoutMoments rm = readout_moments(rho0, model, cfg.delta_t, nc);
    rep.extra["completeness"] = {{"binomial", bc},
                                 {"gaussian_full_grid", cr.full_grid_dev},
                                 {"gaussian_physical_range",
                                  cr.physical_range_dev}};
    rep.extra["quadrature"] = {{"sigma_s", qd.sigma_s},
                               {"points_per_sigma", qd.points_per_sigma},
                               {"span", qd.span},
                               {"tail_mass_estimate", qd.tail_mass_estimate},
                               {"resolved", qd.resolved}};
    rep.extra["readout_moments_first_chunk"] = {
        {"mean", rm.mean}, {"variance", rm.variance}, {"mass", rm.mass}};
    rep.extra["tv_binomial_vs_gaussian_first_chunk"] =
        binomial_vs_gaussian_tv(rho0, model, cfg.n, cfg.use_qnumber_width);
  } else if (cfg.experiment == "difference") {
    long long k = checked_multiple(
        cfg.t_final, cfg.delta_t, "t_final must be a multiple of delta_t");
    auto times = boundary_times(k, cfg.delta_t);
    rep.methods.push_back(series_from(
        "exact", times, exact_at_boundaries(rho0, model, k, cfg.n)));
    std::vector<DensityMatrix> first{rho0}, back{rho0}, high{rho0};
    for (long long i = 0; i < k; ++i) {
      first.push_back(step_first_order(first.back(), model, cfg.delta_t));
      back.push_back(step_with_backaction(back.back(), model, cfg.delta_t));
      high.push_back(step_higher_order(high.back(), model, cfg.delta_t, cfg.n));
    }
    rep.methods.push_back(series_from("first_order", times, first));
    rep.methods.push_back(series_from("with_backaction", times, back));
    rep.methods.push_back(series_from("higher_order", times, high));
    for (std::size_t i = 1; i < rep.methods.size(); ++i)
      rep.distances.push_back(distance_series(rep.methods[0], rep.methods[i]));
    std::vector<int> n_list;
    for (int div : {16, 8, 4, 2, 1}) {
      int nn = std::max(1, cfg.n / div);
      if (n_list.empty() || n_list.back() != nn) n_list.push_back(nn);
    }
    if (n_list.size() < 2) n_list.push_back(cfg.n * 2);
    rep.extra["scaling"] =
        scaling_json(error_scaling_study(rho0, model, n_list, policy));
  } else if (cfg.experiment == "compare") {
    long long k = checked_multiple(
        cfg.t_final, cfg.delta_t, "t_final must be a multiple of delta_t");
    auto times = boundary_times(k, cfg.delta_t);
    rep.methods.push_back(series_from(
        "exact", times, exact_at_boundaries(rho0, model, k, cfg.n)));
    if (model.gamma > 0) {
      SGrid grid =
          SGrid::uniform(model.gamma, cfg.delta_t, cfg.s_points, cfg.s_span);
      NSeriesConfig nc{cfg.n, grid, cfg.use_qnumber_width};
      std::vector<DensityMatrix> gauss{rho0};
      for (long long i = 0; i < k; ++i)
        gauss.push_back(
            nseries_nonselective(gauss.back(), model, cfg.delta_t, nc, policy));
      rep.methods.push_back(series_from("gaussian_chunk", times, gauss));
    } else {
      rep.extra["skipped_methods"] = {"gaussian_chunk (delta_p = 0)"};
    }
    std::vector<DensityMatrix> first{rho0}, back{rho0}, high{rho0};
    for (long long i = 0; i < k; ++i) {
      first.push_back(step_first_order(first.back(), model, cfg.delta_t));
      back.push_back(step_with_backaction(back.back(), model, cfg.delta_t));
      high.push_back(step_higher_order(high.back(), model, cfg.delta_t, cfg.n));
    }
    rep.methods.push_back(series_from("first_order", times, first));
    rep.methods.push_back(series_from("with_backaction", times, back));
    rep.methods.push_back(series_from("higher_order", times, high));
    ContinuumModel cm = continuum_limit(model);
    rep.methods.push_back(series_from(
        "master", times, master_at_boundaries(rho0, cm, k, cfg.delta_t,
                                              cfg.dt)));
    for (std::size_t i = 1; i < rep.methods.size(); ++i)
      rep.distances.push_back(distance_series(rep.methods[0], rep.methods[i]));
  } else if (cfg.experiment == "master") {
    ContinuumModel cm = continuum_limit(model);
    MasterSolution sol = integrate_master(rho0, cm, cfg.t_final, cfg.dt);
    rep.methods.push_back(series_from("master", sol.times, sol.states));
    auto h = pauli_coefficients(cm.H_total);
    rep.extra["continuum"] = {{"gamma", cm.gamma},
                              {"hbar", cm.hbar},
                              {"H_total_pauli", {h[0], h[1], h[2], h[3]}}};
  } else if (cfg.experiment == "sme") {
    ContinuumModel cm = continuum_limit(model);
    if (!(cm.gamma > 0)) throw ConfigError({"sme requires delta_p > 0"});
    long long n_steps = checked_multiple(
        cfg.t_final, cfg.dt, "t_final must be a multiple of dt");
    SmeOptions opt;
    opt.dt = cfg.dt;
    opt.n_steps = static_cast<int>(n_steps);
    SmeEnsembleStats st = sme_run_ensemble(rho0, cm, opt, cfg.n_trajectories,
                                           cfg.seed, policy);
    {
      MethodSeries ms;
      ms.method = "sme_mean";
      for (std::size_t i = 0; i < st.sample_times.size(); ++i)
        ms.samples.push_back(
            sample_from_bloch(st.sample_times[i], st.mean_bloch[i]));
      // master reference on exactly the sample grid
      std::vector<DensityMatrix> ref{rho0};
      DensityMatrix cur = rho0;
      std::size_t si = 1;
      for (long long kk = 1; kk <= n_steps && si < st.sample_times.size();
           ++kk) {
        cur = master_step_rk4(cur, cm, cfg.dt);
        if (std::llround(st.sample_times[si] / cfg.dt) == kk) {
          ref.push_back(cur);
          ++si;
        }
      }
      rep.methods.push_back(
          series_from("master", st.sample_times, ref));
      rep.methods.push_back(std::move(ms));
    }
    rep.distances.push_back(distance_series(rep.methods[0], rep.methods[1]));
    auto mref = rep.methods[0].samples.back();
    std::array<double, 3> ref_end{mref.sx, mref.sy, mref.sz};
    auto sme_end = st.mean_bloch.back();
    double worst = 0;
    for (int d = 0; d < 3; ++d) {
      double allowed = 4.0 * std::max(st.final_se[d], 1e-15) +
                       2.0 * cm.gamma * cfg.dt;
      worst = std::max(worst, std::abs(sme_end[d] - ref_end[d]) / allowed);
    }
    rep.checks.push_back({"mean_matches_master", worst <= 1.0, worst, 1.0});
    rep.checks.push_back({"no_paths_aborted",
                          st.n_aborted == 0,
                          static_cast<double>(st.n_aborted), 0.0});
    rep.extra["sme"] = {
        {"n_paths", st.n_paths},
        {"n_aborted", st.n_aborted},
        {"projected_steps", st.n_projected_steps},
        {"final_se", {st.final_se[0], st.final_se[1], st.final_se[2]}},
        {"mean_final_purity", st.mean_final_purity},
        {"final_distance_to_master", rep.distances.back().distance.back()},
        {"max_final_dev_in_allowance", worst}};
    if (cfg.emit_paths) {
      auto paths = sme_run_paths(rho0, cm, opt, cfg.n_trajectories, cfg.seed,
                                 policy);
      if (paths.size() >= 100 && cfg.window >= cfg.dt) {
        ReadoutStats rs = readout_statistics(paths, cfg.window, cm);
        rep.extra["readout"] = {{"window", rs.window},
                                {"n_windows", rs.n_windows},
                                {"mean", rs.mean},
                                {"variance", rs.variance},
                                {"se_mean", rs.se_mean},
                                {"se_variance", rs.se_variance},
                                {"expected_variance", rs.expected_variance}};
        // histogram of window averages
        std::vector<double> wm;
        std::size_t n_per = static_cast<std::size_t>(
            std::floor(rs.window / cfg.dt + 1e-9));
        for (const SmePath& p : paths) {
          if (p.aborted) continue;
          std::size_t nw = p.readout.size() / n_per;
          for (std::size_t w = 0; w < nw; ++w) {
            double acc = 0;
            for (std::size_t q = 0; q < n_per; ++q)
              acc += p.readout[w * n_per + q];
            wm.push_back(acc / n_per);
          }
        }
        double lo = *std::min_element(wm.begin(), wm.end());
        double hi = *std::max_element(wm.begin(), wm.end());
        if (hi <= lo) hi = lo + 1.0;
        const int nbins = 41;
        std::vector<double> edges(nbins + 1);
        std::vector<std::size_t> counts(nbins, 0);
        for (int i = 0; i <= nbins; ++i)
          edges[i] = lo + (hi - lo) * i / nbins;
        for (double v : wm) {
          int b = static_cast<int>((v - lo) / (hi - lo) * nbins);
          counts[std::clamp(b, 0, nbins - 1)]++;
        }
        rep.extra["readout_hist"] = {{"edges", edges}, {"counts", counts}};
      }
      // a few whole paths for inspection
      std::ostringstream pcsv;
      pcsv << "# uqsim sme paths schema=" << kSummarySchemaVersion << "\n";
      pcsv << "time,path,readout\n";
      std::size_t keep = std::min<std::size_t>(paths.size(), 10);
      for (std::size_t i = 0; i < keep; ++i)
        for (std::size_t s = 0; s < paths[i].readout.size(); ++s)
          pcsv << fmt((s + 1) * cfg.dt) << ',' << i << ','
               << fmt(paths[i].readout[s]) << "\n";
      rep.extra["paths_csv"] = pcsv.str();  // moved to a file below
    }
  } else if (cfg.experiment == "converge") {
    ConvergenceReport cr = discrete_to_continuum_convergence(
        cfg.params, rho0, cfg.tau_list, cfg.t_final, policy);
    ContinuumModel cm = continuum_limit(model);
    MasterSolution sol = integrate_master(rho0, cm, cfg.t_final, cfg.dt);
    rep.methods.push_back(series_from("master", sol.times, sol.states));
    json pts = json::array();
    for (const ConvergencePoint& pt : cr.points)
      pts.push_back({{"tau", pt.tau}, {"distance", pt.distance}});
    rep.extra["convergence"] = {{"points", pts}, {"slope", cr.slope}};
    double dev = std::abs(cr.slope - 1.0);
    rep.checks.push_back({"slope_near_first_order", dev <= 0.2, dev, 0.2});
  } else if (cfg.experiment == "bounds") {
    int nb = std::min(cfg.n, 12);
    BoundReport br = check_commutator_bounds(model, nb, policy);
    rep.extra["bounds"] = {
        {"n_steps", br.n_steps},
        {"delta_t", br.delta_t},
        {"max_norm_reorder_free", br.max_norm_reorder_free},
        {"max_norm_reorder_sorted", br.max_norm_reorder_sorted},
        {"bound_free", br.bound_free},
        {"bound_sorted", br.bound_sorted},
        {"ratio_free", br.ratio_free},
        {"ratio_sorted", br.ratio_sorted},
        {"sequences", br.sequences},
        {"skipped", br.skipped}};
    rep.checks.push_back({"reorder_free_within_10x_bound",
                          br.ratio_free <= 10.0, br.ratio_free, 10.0});
    rep.checks.push_back({"reorder_sorted_within_10x_bound",
                          br.ratio_sorted <= 10.0, br.ratio_sorted, 10.0});
  } else {
    throw ConfigError({"unknown experiment '" + cfg.experiment + "'"});
  }

  add_state_checks(rep);
  res.exit_code = 0;
  for (const CheckResult& c : rep.checks)
    if (!c.passed) res.exit_code = 3;

  // Assemble all file contents first, then write; a failure part way
  // through leaves nothing behind.
  std::string paths_csv;
  if (rep.extra.contains("paths_csv")) {
    paths_csv = rep.extra["paths_csv"].get<std::string>();
    rep.extra.erase("paths_csv");
  }
  std::string csv = build_timeseries_csv(cfg, rep.methods);
  auto plots = build_plot_files(rep);

  std::vector<std::string> files;
  files.push_back(cfg.out_dir + "/timeseries.csv");
  if (!paths_csv.empty()) files.push_back(cfg.out_dir + "/sme_paths.csv");
  std::ostringstream manifest;
  for (const PlotFile& pf : plots) {
    files.push_back(cfg.out_dir + "/plots/" + pf.name);
    manifest << pf.name << "  " << pf.description << "\n";
  }
  files.push_back(cfg.out_dir + "/plots/manifest.txt");
  files.push_back(cfg.out_dir + "/summary.json");

  json summ = summary_json(cfg, rep, files);

  std::vector<std::string> written;
  auto write_file = [&](const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    written.push_back(path);
    out << content;
    if (!out) throw std::runtime_error("short write to " + path);
  };
  try {
    fs::create_directories(cfg.out_dir + "/plots");
    write_file(cfg.out_dir + "/timeseries.csv", csv);
    if (!paths_csv.empty())
      write_file(cfg.out_dir + "/sme_paths.csv", paths_csv);
    for (const PlotFile& pf : plots)
      write_file(cfg.out_dir + "/plots/" + pf.name, pf.content);
    write_file(cfg.out_dir + "/plots/manifest.txt", manifest.str());
    write_file(cfg.out_dir + "/summary.json", summ.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    for (const std::string& p : written) fs::remove(p, ec);
    fs::remove(cfg.out_dir + "/plots", ec);
    fs::remove(cfg.out_dir, ec);
    throw;
  }
  res.files = files;
  return res;
}

}  // namespace uqsim
