// Times the data-parallel kernels against their serial execution and
// verifies that both produce bit-identical results (the reductions are
// fixed-order by construction).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "uqsim/continuum.hpp"
#include "uqsim/exact.hpp"
#include "uqsim/nseries.hpp"

using namespace uqsim;

namespace {

double time_call(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

bool same_bits(const CMat2& a, const CMat2& b) {
  return std::memcmp(a.e.data(), b.e.data(), sizeof a.e) == 0;
}

struct Row {
  std::string name;
  double serial_s = 0;
  double parallel_s = 0;
  bool identical = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uqsim kernel benchmark (serial vs OpenMP)"};
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread count (0 = default)");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  ModelParams params;
  params.p1 = 0.45;
  params.p2 = 0.55;
  params.tau = 0.01;
  params.H = 0.05 * pauli_x();
  params.H_plus = 0.03 * pauli_z();
  params.H_minus = 0.02 * pauli_x();
  DerivedModel model = derive(params);
  DensityMatrix rho0 = DensityMatrix::from_bloch(1.0, 0.0, 0.0);

  std::vector<Row> rows;

  {
    Row r{"selective ensemble (2e4 x 200)", 0, 0, false};
    EnsembleStats a, b;
    r.serial_s = time_call([&] {
      a = run_selective_ensemble(rho0, model, 200, 20000, 42, Exec::Serial);
    });
    r.parallel_s = time_call([&] {
      b = run_selective_ensemble(rho0, model, 200, 20000, 42, Exec::Parallel);
    });
    r.identical = a.mean_bloch.size() == b.mean_bloch.size() &&
                  same_bits(a.mean_final.m, b.mean_final.m);
    for (std::size_t i = 0; r.identical && i < a.mean_bloch.size(); ++i)
      for (int d = 0; d < 3; ++d)
        r.identical =
            r.identical && same_bits(a.mean_bloch[i][d], b.mean_bloch[i][d]);
    rows.push_back(r);
  }

  {
    Row r{"branch enumeration (2^18)", 0, 0, false};
    BranchTable a, b;
    r.serial_s =
        time_call([&] { a = enumerate_branches(rho0, model, 18, Exec::Serial); });
    r.parallel_s = time_call(
        [&] { b = enumerate_branches(rho0, model, 18, Exec::Parallel); });
    r.identical = a.branches.size() == b.branches.size() &&
                  same_bits(a.weight_sum, b.weight_sum);
    for (std::size_t i = 0; r.identical && i < a.branches.size(); ++i)
      r.identical = r.identical &&
                    same_bits(a.branches[i].weight, b.branches[i].weight) &&
                    same_bits(a.branches[i].unnormalized, b.branches[i].unnormalized);
    rows.push_back(r);
  }

  {
    Row r{"gaussian quadrature (1601 x 100)", 0, 0, false};
    double delta_t = 100 * params.tau;
    NSeriesConfig nc{100, SGrid::uniform(model.gamma, delta_t, 1601, 10.0),
                     false};
    DensityMatrix a = rho0, b = rho0;
    r.serial_s = time_call([&] {
      for (int i = 0; i < 100; ++i)
        a = nseries_nonselective(a, model, delta_t, nc, Exec::Serial);
    });
    r.parallel_s = time_call([&] {
      for (int i = 0; i < 100; ++i)
        b = nseries_nonselective(b, model, delta_t, nc, Exec::Parallel);
    });
    r.identical = same_bits(a.m, b.m);
    rows.push_back(r);
  }

  {
    Row r{"sme ensemble (2e3 x 1e3)", 0, 0, false};
    ContinuumModel cm = continuum_limit(model);
    SmeOptions opt;
    opt.dt = 1e-3;
    opt.n_steps = 1000;
    SmeEnsembleStats a, b;
    r.serial_s = time_call([&] {
      a = sme_run_ensemble(rho0, cm, opt, 2000, 42, Exec::Serial);
    });
    r.parallel_s = time_call([&] {
      b = sme_run_ensemble(rho0, cm, opt, 2000, 42, Exec::Parallel);
    });
    r.identical = same_bits(a.mean_final.m, b.mean_final.m) &&
                  a.n_aborted == b.n_aborted;
    for (int d = 0; r.identical && d < 3; ++d)
      r.identical = r.identical && same_bits(a.final_se[d], b.final_se[d]);
    rows.push_back(r);
  }

  int max_threads = omp_get_max_threads();
  std::printf("threads available: %d\n", max_threads);
  std::printf("%-36s %10s %10s %8s  %s\n", "kernel", "serial[s]",
              "openmp[s]", "speedup", "bit-identical");
  bool all_ok = true;
  for (const Row& r : rows) {
    std::printf("%-36s %10.3f %10.3f %8.2f  %s\n", r.name.c_str(), r.serial_s,
                r.parallel_s,
                r.parallel_s > 0 ? r.serial_s / r.parallel_s : 0.0,
                r.identical ? "yes" : "NO");
    all_ok = all_ok && r.identical;
  }
  if (!all_ok) {
    std::fprintf(stderr, "serial and parallel results differ\n");
    return 1;
  }
  return 0;
}
