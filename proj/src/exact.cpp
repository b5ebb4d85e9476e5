#include "uqsim/exact.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace uqsim {

static StepResult finish_branch(const CMat2& evolved, const DerivedModel& model,
                                int outcome) {
  const CMat2& M = outcome > 0 ? model.M_plus : model.M_minus;
  CMat2 unnorm = M * evolved * adjoint(M);
  double p = std::real(trace(unnorm));
  if (p < 1e-14)
    throw std::runtime_error(
        "measurement branch has vanishing probability (p < 1e-14)");
  return {DensityMatrix(unnorm / p), outcome, p};
}

StepResult selective_step(const DensityMatrix& rho, const DerivedModel& model,
                          RandomStream& rng) {
  CMat2 evolved = model.U * rho.m * adjoint(model.U);
  double p_plus = std::real(trace(model.E_plus * evolved));
  int outcome = rng.uniform01() < p_plus ? +1 : -1;
  return finish_branch(evolved, model, outcome);
}

StepResult apply_outcome(const DensityMatrix& rho, const DerivedModel& model,
                         int outcome) {
  if (outcome != +1 && outcome != -1)
    throw std::invalid_argument("apply_outcome: outcome must be +1 or -1");
  CMat2 evolved = model.U * rho.m * adjoint(model.U);
  return finish_branch(evolved, model, outcome);
}

DensityMatrix nonselective_step(const DensityMatrix& rho,
                                const DerivedModel& model) {
  CMat2 evolved = model.U * rho.m * adjoint(model.U);
  return DensityMatrix(model.M_plus * evolved * adjoint(model.M_plus) +
                       model.M_minus * evolved * adjoint(model.M_minus));
}

TrajectoryRecord run_sequence(const DensityMatrix& rho0,
                              const DerivedModel& model, int n_steps,
                              std::uint64_t seed) {
  if (n_steps < 0) throw std::invalid_argument("run_sequence: n_steps < 0");
  TrajectoryRecord rec;
  rec.tau = model.params.tau;
  rec.seed = seed;
  rec.times.reserve(n_steps + 1);
  rec.states.reserve(n_steps + 1);
  rec.outcomes.reserve(n_steps);
  rec.probabilities.reserve(n_steps);
  RandomStream rng(seed);
  DensityMatrix rho = rho0;
  rec.times.push_back(0.0);
  rec.states.push_back(rho);
  for (int k = 1; k <= n_steps; ++k) {
    StepResult r = selective_step(rho, model, rng);
    rho = r.state;
    rec.times.push_back(k * model.params.tau);
    rec.states.push_back(rho);
    rec.outcomes.push_back(r.outcome);
    rec.probabilities.push_back(r.probability);
  }
  return rec;
}

std::vector<DensityMatrix> run_nonselective(const DensityMatrix& rho0,
                                            const DerivedModel& model,
                                            int n_steps) {
  if (n_steps < 0)
    throw std::invalid_argument("run_nonselective: n_steps < 0");
  std::vector<DensityMatrix> out;
  out.reserve(n_steps + 1);
  out.push_back(rho0);
  for (int k = 0; k < n_steps; ++k)
    out.push_back(nonselective_step(out.back(), model));
  return out;
}

BranchTable enumerate_branches(const DensityMatrix& rho0,
                               const DerivedModel& model, int n_steps,
                               Exec policy) {
  if (n_steps < 1 || n_steps > kMaxEnumerationSteps)
    throw std::invalid_argument(
        "enumerate_branches: n_steps must be in [1," +
        std::to_string(kMaxEnumerationSteps) + "], table grows as 2^n");
  const CMat2 step_op[2] = {model.M_minus * model.U, model.M_plus * model.U};

  BranchTable table;
  table.n_steps = n_steps;
  table.branches.resize(std::size_t{1} << n_steps);

  // Shared prefixes for the first `depth` outcomes, then independent
  // subtrees below each prefix; subtree leaves land in disjoint slots.
  const int depth = std::min(n_steps, 8);
  std::vector<CMat2> prefix{identity()};
  for (int k = 0; k < depth; ++k) {
    std::vector<CMat2> next(prefix.size() * 2);
    for (std::size_t bits = 0; bits < prefix.size(); ++bits) {
      next[bits] = step_op[0] * prefix[bits];
      next[bits | (std::size_t{1} << k)] = step_op[1] * prefix[bits];
    }
    prefix.swap(next);
  }

  const int tail = n_steps - depth;
  for_each_chunk(prefix.size(), 1, policy,
                 [&](std::size_t, std::size_t b, std::size_t e) {
                   for (std::size_t pre = b; pre < e; ++pre) {
                     // iterate the 2^tail suffixes under this prefix
                     const std::size_t n_suffix = std::size_t{1} << tail;
                     for (std::size_t suf = 0; suf < n_suffix; ++suf) {
                       CMat2 omega = prefix[pre];
                       for (int k = 0; k < tail; ++k)
                         omega = step_op[(suf >> k) & 1u] * omega;
                       CMat2 s = omega * rho0.m * adjoint(omega);
                       std::size_t bits = pre | (suf << depth);
                       table.branches[bits] = {std::real(trace(s)), s};
                     }
                   }
                 });

  double sum = 0.0;
  for (const auto& br : table.branches) sum += br.weight;
  table.weight_sum = sum;
  return table;
}

DensityMatrix branch_average(const BranchTable& table) {
  CMat2 acc = zero();
  for (const auto& br : table.branches) acc += br.unnormalized;
  return DensityMatrix(acc);
}

EnsembleStats run_selective_ensemble(const DensityMatrix& rho0,
                                     const DerivedModel& model, int n_steps,
                                     std::size_t n_trajectories,
                                     std::uint64_t master_seed, Exec policy) {
  if (n_steps < 0 || n_trajectories == 0)
    throw std::invalid_argument("run_selective_ensemble: empty request");

  struct Partial {
    std::vector<std::array<double, 3>> bloch_sum;
    std::array<double, 3> final_sum{};
    std::array<double, 3> final_sq{};
  };
  auto chunks = make_chunks(n_trajectories, kDefaultChunk);
  std::vector<Partial> partials(chunks.size());

  for_each_chunk(
      n_trajectories, kDefaultChunk, policy,
      [&](std::size_t c, std::size_t b, std::size_t e) {
        Partial& part = partials[c];
        part.bloch_sum.assign(n_steps + 1, {0.0, 0.0, 0.0});
        for (std::size_t i = b; i < e; ++i) {
          RandomStream rng = RandomStream::for_trajectory(master_seed, i);
          DensityMatrix rho = rho0;
          auto v0 = rho.bloch();
          for (int j = 0; j < 3; ++j) part.bloch_sum[0][j] += v0[j];
          for (int k = 1; k <= n_steps; ++k) {
            rho = selective_step(rho, model, rng).state;
            auto v = rho.bloch();
            for (int j = 0; j < 3; ++j) part.bloch_sum[k][j] += v[j];
          }
          auto vf = rho.bloch();
          for (int j = 0; j < 3; ++j) {
            part.final_sum[j] += vf[j];
            part.final_sq[j] += vf[j] * vf[j];
          }
        }
      });

  EnsembleStats st;
  st.n_steps = n_steps;
  st.n_trajectories = n_trajectories;
  st.times.resize(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) st.times[k] = k * model.params.tau;
  st.mean_bloch.assign(n_steps + 1, {0.0, 0.0, 0.0});
  std::array<double, 3> fsum{}, fsq{};
  for (const auto& part : partials) {
    for (int k = 0; k <= n_steps; ++k)
      for (int j = 0; j < 3; ++j) st.mean_bloch[k][j] += part.bloch_sum[k][j];
    for (int j = 0; j < 3; ++j) {
      fsum[j] += part.final_sum[j];
      fsq[j] += part.final_sq[j];
    }
  }
  const double n = static_cast<double>(n_trajectories);
  for (auto& v : st.mean_bloch)
    for (int j = 0; j < 3; ++j) v[j] /= n;
  for (int j = 0; j < 3; ++j) {
    double mean = fsum[j] / n;
    double var = n > 1 ? std::max(0.0, (fsq[j] - n * mean * mean) / (n - 1.0))
                       : 0.0;
    st.final_se[j] = std::sqrt(var / n);
  }
  const auto& mf = st.mean_bloch[n_steps];
  st.mean_final = DensityMatrix(0.5 * from_pauli(1.0, mf[0], mf[1], mf[2]));
  return st;
}

BoundReport check_commutator_bounds(const DerivedModel& model, int n_steps,
                                    Exec policy) {
  if (n_steps < 1 || n_steps > 12)
    throw std::invalid_argument(
        "check_commutator_bounds: n_steps must be in [1,12]");
  const ModelParams& p = model.params;
  const double dt = n_steps * p.tau;
  const double hbar = p.hbar;

  const CMat2 step_op[2] = {model.M_minus * model.U, model.M_plus * model.U};
  const CMat2 kraus[2] = {model.M_minus, model.M_plus};
  const CMat2 u_free_n = herm_exp(p.H, dt, hbar);

  // sorted form per "+" count a: U+^a U-^(n-a) |M+|^a |M-|^(n-a) U^n
  std::vector<CMat2> sorted(n_steps + 1);
  for (int a = 0; a <= n_steps; ++a) {
    int b = n_steps - a;
    CMat2 up = herm_exp(p.H_plus, a * p.tau, hbar);
    CMat2 um = herm_exp(p.H_minus, b * p.tau, hbar);
    CMat2 mags(std::pow(p.p1, 0.5 * a) * std::pow(1.0 - p.p1, 0.5 * b), 0.0,
               0.0,
               std::pow(p.p2, 0.5 * a) * std::pow(1.0 - p.p2, 0.5 * b));
    sorted[a] = up * um * mags * u_free_n;
  }

  const std::size_t total = std::size_t{1} << n_steps;
  struct Partial {
    double max_free = 0, max_sorted = 0;
    std::size_t skipped = 0;
  };
  auto chunks = make_chunks(total, 256);
  std::vector<Partial> partials(chunks.size());

  for_each_chunk(total, 256, policy,
                 [&](std::size_t c, std::size_t b, std::size_t e) {
                   Partial& part = partials[c];
                   for (std::size_t bits = b; bits < e; ++bits) {
                     CMat2 exact = identity();
                     CMat2 mprod = identity();
                     for (int k = 0; k < n_steps; ++k) {
                       int m = (bits >> k) & 1u;
                       exact = step_op[m] * exact;
                       mprod = kraus[m] * mprod;
                     }
                     CMat2 reordered = mprod * u_free_n;
                     int a = std::popcount(bits);
                     if (std::abs(det(reordered)) < 1e-30 ||
                         std::abs(det(sorted[a])) < 1e-30) {
                       ++part.skipped;
                       continue;
                     }
                     CMat2 c_free = inverse(reordered) * exact - identity();
                     CMat2 c_sorted =
                         inverse(sorted[a]) * reordered - identity();
                     part.max_free = std::max(part.max_free, op_norm(c_free));
                     part.max_sorted =
                         std::max(part.max_sorted, op_norm(c_sorted));
                   }
                 });

  BoundReport rep;
  rep.n_steps = n_steps;
  rep.delta_t = dt;
  rep.sequences = total;
  for (const auto& part : partials) {
    rep.max_norm_reorder_free =
        std::max(rep.max_norm_reorder_free, part.max_free);
    rep.max_norm_reorder_sorted =
        std::max(rep.max_norm_reorder_sorted, part.max_sorted);
    rep.skipped += part.skipped;
  }
  const double max_hpm = std::max(model.norm_H_plus, model.norm_H_minus);
  rep.bound_free = n_steps * model.delta_p * dt * model.norm_H / hbar +
                   dt * dt * model.norm_H * max_hpm / (hbar * hbar);
  rep.bound_sorted =
      n_steps * model.delta_p * dt * max_hpm / hbar +
      dt * dt * model.norm_H_plus * model.norm_H_minus / (hbar * hbar);
  auto ratio = [](double norm, double bound) {
    if (bound > 1e-300) return norm / bound;
    return norm <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
  };
  rep.ratio_free = ratio(rep.max_norm_reorder_free, rep.bound_free);
  rep.ratio_sorted = ratio(rep.max_norm_reorder_sorted, rep.bound_sorted);
  return rep;
}

}  // namespace uqsim
