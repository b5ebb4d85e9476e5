#include "uqsim/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "uqsim/exact.hpp"
#include "uqsim/fit.hpp"

namespace uqsim {

namespace {

const cplx kI{0.0, 1.0};

double auto_abort_eig(const SmeOptions& opt, double gamma) {
  if (!std::isnan(opt.abort_eig)) return opt.abort_eig;
  double t_total = opt.n_steps * opt.dt;
  return -(1e-8 + 2.0 * std::sqrt(gamma * opt.dt * t_total));
}

// Euler noise pushes the squared Bloch radius across 1 by +-gamma(1-z^2)dt
// per step no matter how small dt is, and once outside the ball the
// deviation grows multiplicatively (relative step 2 sqrt(gamma) z dW), so
// excursions must be contained rather than treated as failures. Truncating
// the negative eigenvalue - a radial projection back onto the sphere -
// displaces the state by O(gamma dt), the same order as the Euler weak
// error, and therefore keeps first-order weak convergence intact. Returns
// the pre-projection minimum eigenvalue.
double contain_in_ball(DensityMatrix& rho) {
  double lo = rho.min_eig();
  if (lo < 0.0) {
    auto b = rho.bloch();
    double r = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    if (r > 1.0)
      rho = DensityMatrix::from_bloch(b[0] / r, b[1] / r, b[2] / r);
  }
  return lo;
}

void validate_sme(const ContinuumModel& cm, const SmeOptions& opt) {
  if (!(opt.dt > 0)) throw std::invalid_argument("sme: dt must be positive");
  if (opt.n_steps < 1)
    throw std::invalid_argument("sme: n_steps must be >= 1");
  if (!(cm.gamma > 0))
    throw std::invalid_argument("sme: gamma must be positive");
  if (opt.state_stride < 0)
    throw std::invalid_argument("sme: state_stride must be >= 0");
}

std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(master_seed) ^ splitmix64(index + 1);
}

}  // namespace

ContinuumModel continuum_limit(const DerivedModel& model) {
  ContinuumModel cm;
  cm.H_total = model.params.H + model.H_av;
  cm.gamma = model.gamma;
  cm.hbar = model.params.hbar;
  return cm;
}

ModelParams scale_to_continuum(const ModelParams& base, double tau_new) {
  if (!(tau_new > 0))
    throw std::invalid_argument("scale_to_continuum: tau_new must be > 0");
  DerivedModel d = derive(base);
  double dp = std::sqrt(4.0 * d.gamma * d.p0 * (1.0 - d.p0) * tau_new);
  double p1 = d.p0 - 0.5 * dp;
  double p2 = d.p0 + 0.5 * dp;
  if (p1 < -1e-12 || p2 > 1.0 + 1e-12)
    throw std::domain_error(
        "scale_to_continuum: tau_new too large, probabilities leave [0,1]");
  ModelParams out = base;
  out.p1 = std::clamp(p1, 0.0, 1.0);
  out.p2 = std::clamp(p2, 0.0, 1.0);
  out.tau = tau_new;
  return out;
}

CMat2 master_rhs(const CMat2& rho, const ContinuumModel& cm) {
  CMat2 sz = pauli_z();
  return (-kI / cm.hbar) * commutator(cm.H_total, rho) -
         (cm.gamma / 8.0) * commutator(sz, commutator(sz, rho));
}

DensityMatrix master_step_rk4(const DensityMatrix& rho,
                              const ContinuumModel& cm, double dt) {
  const CMat2& y = rho.m;
  CMat2 k1 = master_rhs(y, cm);
  CMat2 k2 = master_rhs(y + (0.5 * dt) * k1, cm);
  CMat2 k3 = master_rhs(y + (0.5 * dt) * k2, cm);
  CMat2 k4 = master_rhs(y + dt * k3, cm);
  return DensityMatrix(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

MasterSolution integrate_master(const DensityMatrix& rho0,
                                const ContinuumModel& cm, double t_final,
                                double dt) {
  if (!(dt > 0)) throw std::invalid_argument("integrate_master: dt must be > 0");
  if (t_final < 0)
    throw std::invalid_argument("integrate_master: t_final must be >= 0");
  MasterSolution sol;
  sol.times.push_back(0.0);
  sol.states.push_back(rho0);
  double remaining = t_final;
  double t = 0.0;
  while (remaining > 1e-12 * std::max(1.0, t_final)) {
    double h = std::min(dt, remaining);
    sol.states.push_back(master_step_rk4(sol.states.back(), cm, h));
    t += h;
    remaining = t_final - t;
    sol.times.push_back(t);
  }
  if (!sol.times.empty()) sol.times.back() = t_final;
  return sol;
}

DensityMatrix sme_step_euler(const DensityMatrix& rho,
                             const ContinuumModel& cm, double dt, double dW,
                             double* readout) {
  auto b = rho.bloch();
  double z = b[2];
  CMat2 sz = pauli_z();
  CMat2 centered = sz - z * identity();
  CMat2 next = rho.m + dt * master_rhs(rho.m, cm) +
               (0.5 * std::sqrt(cm.gamma) * dW) *
                   anticommutator(centered, rho.m);
  if (readout) {
    *readout = cm.gamma > 0
                   ? z + dW / (std::sqrt(cm.gamma) * dt)
                   : std::numeric_limits<double>::quiet_NaN();
  }
  return renormalize(DensityMatrix(next));
}

SmePath sme_run_path(const DensityMatrix& rho0, const ContinuumModel& cm,
                     const SmeOptions& opt, std::uint64_t seed) {
  validate_sme(cm, opt);
  double floor_eig = auto_abort_eig(opt, cm.gamma);
  RandomStream rng(seed);
  SmePath path;
  path.dt = opt.dt;
  path.seed = seed;
  path.readout.reserve(opt.n_steps);
  if (opt.record_noise) path.noise.reserve(opt.n_steps);
  if (opt.state_stride > 0) {
    path.times.push_back(0.0);
    path.states.push_back(rho0);
  }
  DensityMatrix rho = rho0;
  path.min_eig_seen = rho.min_eig();
  const double sqrt_dt = std::sqrt(opt.dt);
  for (int k = 0; k < opt.n_steps; ++k) {
    double dW = rng.gaussian() * sqrt_dt;
    double s = 0;
    rho = sme_step_euler(rho, cm, opt.dt, dW, &s);
    path.readout.push_back(s);
    if (opt.record_noise) path.noise.push_back(dW);
    double lo = opt.project ? contain_in_ball(rho) : rho.min_eig();
    path.min_eig_seen = std::min(path.min_eig_seen, lo);
    if (opt.project && lo < 0.0) ++path.n_projections;
    if (!(lo >= floor_eig)) {
      path.aborted = true;
      path.abort_step = k;
      break;
    }
    if (opt.state_stride > 0 && (k + 1) % opt.state_stride == 0) {
      path.times.push_back((k + 1) * opt.dt);
      path.states.push_back(rho);
    }
  }
  path.final_state = rho;
  path.final_purity = rho.purity();
  return path;
}

SmeEnsembleStats sme_run_ensemble(const DensityMatrix& rho0,
                                  const ContinuumModel& cm,
                                  const SmeOptions& opt, std::size_t n_paths,
                                  std::uint64_t master_seed, Exec policy,
                                  int sample_stride) {
  validate_sme(cm, opt);
  if (n_paths < 1)
    throw std::invalid_argument("sme ensemble: n_paths must be >= 1");
  if (sample_stride < 0)
    throw std::invalid_argument("sme ensemble: sample_stride must be >= 0");
  if (sample_stride == 0) sample_stride = std::max(1, opt.n_steps / 50);
  std::vector<int> sample_steps;
  sample_steps.push_back(0);
  for (int k = sample_stride; k < opt.n_steps; k += sample_stride)
    sample_steps.push_back(k);
  sample_steps.push_back(opt.n_steps);
  const std::size_t n_samples = sample_steps.size();

  struct Partial {
    std::vector<std::array<double, 3>> bloch_sum;
    std::array<double, 3> final_sum{};
    std::array<double, 3> final_sq{};
    double purity_sum = 0;
    std::size_t used = 0;
    std::size_t aborted = 0;
    std::size_t projections = 0;
  };
  auto chunks = make_chunks(n_paths, kDefaultChunk);
  std::vector<Partial> partial(chunks.size());
  const double floor_eig = auto_abort_eig(opt, cm.gamma);
  const double sqrt_dt = std::sqrt(opt.dt);

  for_each_chunk(
      n_paths, kDefaultChunk, policy,
      [&](std::size_t c, std::size_t b, std::size_t e) {
        Partial& p = partial[c];
        p.bloch_sum.assign(n_samples, {0.0, 0.0, 0.0});
        for (std::size_t i = b; i < e; ++i) {
          RandomStream rng(path_seed(master_seed, i));
          DensityMatrix rho = rho0;
          std::vector<std::array<double, 3>> samples(n_samples);
          std::size_t si = 0;
          if (sample_steps[0] == 0) samples[si++] = rho.bloch();
          bool aborted = false;
          for (int k = 0; k < opt.n_steps; ++k) {
            double dW = rng.gaussian() * sqrt_dt;
            rho = sme_step_euler(rho, cm, opt.dt, dW, nullptr);
            double lo = opt.project ? contain_in_ball(rho) : rho.min_eig();
            if (opt.project && lo < 0.0) ++p.projections;
            if (!(lo >= floor_eig)) {
              aborted = true;
              break;
            }
            if (si < n_samples && sample_steps[si] == k + 1)
              samples[si++] = rho.bloch();
          }
          if (aborted) {
            ++p.aborted;
            continue;
          }
          auto fb = rho.bloch();
          for (std::size_t j = 0; j < n_samples; ++j)
            for (int d = 0; d < 3; ++d) p.bloch_sum[j][d] += samples[j][d];
          for (int d = 0; d < 3; ++d) {
            p.final_sum[d] += fb[d];
            p.final_sq[d] += fb[d] * fb[d];
          }
          p.purity_sum += rho.purity();
          ++p.used;
        }
      });

  SmeEnsembleStats st;
  st.n_paths = n_paths;
  st.dt = opt.dt;
  st.mean_bloch.assign(n_samples, {0.0, 0.0, 0.0});
  std::array<double, 3> fsum{}, fsq{};
  double purity_sum = 0;
  std::size_t used = 0;
  for (const Partial& p : partial) {
    st.n_aborted += p.aborted;
    st.n_projected_steps += p.projections;
    used += p.used;
    purity_sum += p.purity_sum;
    if (p.bloch_sum.size() == n_samples)
      for (std::size_t j = 0; j < n_samples; ++j)
        for (int d = 0; d < 3; ++d) st.mean_bloch[j][d] += p.bloch_sum[j][d];
    for (int d = 0; d < 3; ++d) {
      fsum[d] += p.final_sum[d];
      fsq[d] += p.final_sq[d];
    }
  }
  if (used == 0)
    throw std::runtime_error("sme ensemble: every path hit the positivity floor");
  for (std::size_t j = 0; j < n_samples; ++j)
    for (int d = 0; d < 3; ++d) st.mean_bloch[j][d] /= used;
  st.sample_times.resize(n_samples);
  for (std::size_t j = 0; j < n_samples; ++j)
    st.sample_times[j] = sample_steps[j] * opt.dt;
  std::array<double, 3> mean{};
  for (int d = 0; d < 3; ++d) {
    mean[d] = fsum[d] / used;
    double var =
        used > 1 ? (fsq[d] - used * mean[d] * mean[d]) / (used - 1) : 0.0;
    st.final_se[d] = var > 0 ? std::sqrt(var / used) : 0.0;
  }
  st.mean_final = DensityMatrix::from_bloch(mean[0], mean[1], mean[2]);
  st.mean_final_purity = purity_sum / used;
  return st;
}

std::vector<SmePath> sme_run_paths(const DensityMatrix& rho0,
                                   const ContinuumModel& cm,
                                   const SmeOptions& opt, std::size_t n_paths,
                                   std::uint64_t master_seed, Exec policy) {
  validate_sme(cm, opt);
  if (n_paths < 1)
    throw std::invalid_argument("sme paths: n_paths must be >= 1");
  std::vector<SmePath> paths(n_paths);
  for_each_chunk(n_paths, kDefaultChunk, policy,
                 [&](std::size_t, std::size_t b, std::size_t e) {
                   for (std::size_t i = b; i < e; ++i)
                     paths[i] =
                         sme_run_path(rho0, cm, opt, path_seed(master_seed, i));
                 });
  return paths;
}

ReadoutStats readout_statistics(const std::vector<SmePath>& paths,
                                double window, const ContinuumModel& cm) {
  if (paths.size() < 100)
    throw std::invalid_argument(
        "readout_statistics: need at least 100 paths");
  const double dt = paths.front().dt;
  if (window < dt * (1.0 - 1e-9))
    throw std::invalid_argument(
        "readout_statistics: window must be at least one step");
  const std::size_t n_per =
      static_cast<std::size_t>(std::floor(window / dt + 1e-9));
  double sum = 0, sumsq = 0;
  std::size_t count = 0;
  for (const SmePath& path : paths) {
    if (path.aborted) continue;
    if (path.dt != dt)
      throw std::invalid_argument("readout_statistics: mixed step sizes");
    const std::size_t n_windows = path.readout.size() / n_per;
    for (std::size_t w = 0; w < n_windows; ++w) {
      double acc = 0;
      for (std::size_t k = 0; k < n_per; ++k)
        acc += path.readout[w * n_per + k];
      double avg = acc / n_per;
      sum += avg;
      sumsq += avg * avg;
      ++count;
    }
  }
  if (count < 2)
    throw std::invalid_argument(
        "readout_statistics: not enough complete windows");
  ReadoutStats st;
  st.window = n_per * dt;
  st.n_windows = count;
  st.mean = sum / count;
  st.variance = (sumsq - count * st.mean * st.mean) / (count - 1);
  st.se_mean = std::sqrt(std::max(0.0, st.variance) / count);
  st.se_variance = st.variance * std::sqrt(2.0 / (count - 1));
  st.expected_variance = 1.0 / (cm.gamma * st.window);
  return st;
}

ConvergenceReport discrete_to_continuum_convergence(
    const ModelParams& base, const DensityMatrix& rho0,
    const std::vector<double>& tau_list, double t_final, Exec policy) {
  if (tau_list.size() < 2)
    throw std::invalid_argument("convergence: need at least 2 periods");
  if (!(t_final > 0))
    throw std::invalid_argument("convergence: t_final must be > 0");
  std::vector<int> steps(tau_list.size());
  for (std::size_t i = 0; i < tau_list.size(); ++i) {
    double tau = tau_list[i];
    if (!(tau > 0))
      throw std::invalid_argument("convergence: periods must be > 0");
    long long n = std::llround(t_final / tau);
    if (n < 1 || std::abs(n * tau - t_final) > 1e-9 * t_final)
      throw std::invalid_argument("convergence: tau must divide t_final");
    steps[i] = static_cast<int>(n);
  }
  ContinuumModel cm = continuum_limit(derive(base));
  DensityMatrix ref =
      integrate_master(rho0, cm, t_final, 1e-4 * t_final).states.back();

  ConvergenceReport rep;
  rep.points.resize(tau_list.size());
  for_each_chunk(tau_list.size(), 1, policy,
                 [&](std::size_t, std::size_t b, std::size_t) {
                   DerivedModel scaled =
                       derive(scale_to_continuum(base, tau_list[b]));
                   DensityMatrix end =
                       run_nonselective(rho0, scaled, steps[b]).back();
                   rep.points[b] = {tau_list[b], trace_distance(end, ref)};
                 });
  std::vector<double> x, y;
  for (const ConvergencePoint& pt : rep.points) {
    if (pt.distance > 0) {
      x.push_back(pt.tau);
      y.push_back(pt.distance);
    }
  }
  rep.slope = x.size() >= 2 ? fit_loglog(x, y).slope
                            : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

}  // namespace uqsim
