#include "uqsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uqsim {

DerivedModel derive(const ModelParams& params) {
  std::vector<std::string> issues;
  if (!(params.p1 >= 0.0 && params.p1 <= 1.0))
    issues.push_back("p1 outside [0,1]");
  if (!(params.p2 >= 0.0 && params.p2 <= 1.0))
    issues.push_back("p2 outside [0,1]");
  if (!(params.p1 <= params.p2))
    issues.push_back("p1 > p2 (convention is delta_p = p2 - p1 >= 0)");
  if (!(params.tau > 0.0)) issues.push_back("tau must be positive");
  if (!(params.hbar > 0.0)) issues.push_back("hbar must be positive");
  if (!is_hermitian(params.H)) issues.push_back("H is not Hermitian");
  if (!is_hermitian(params.H_plus)) issues.push_back("H_plus is not Hermitian");
  if (!is_hermitian(params.H_minus))
    issues.push_back("H_minus is not Hermitian");
  if (!issues.empty()) {
    std::string msg = "derive:";
    for (const auto& s : issues) msg += " " + s + ";";
    throw std::invalid_argument(msg);
  }

  DerivedModel m;
  m.params = params;
  m.p0 = 0.5 * (params.p1 + params.p2);
  m.delta_p = params.p2 - params.p1;
  double pq = m.p0 * (1.0 - m.p0);
  if (m.delta_p == 0.0) {
    m.gamma = 0.0;
  } else if (pq <= 0.0) {
    // unreachable given 0 <= p1 <= p2 <= 1 and delta_p > 0; kept as a guard
    throw std::invalid_argument("derive: rate undefined, p0 (1-p0) = 0");
  } else {
    m.gamma = m.delta_p * m.delta_p / (4.0 * pq * params.tau);
  }

  m.M_plus_abs = CMat2(std::sqrt(params.p1), 0.0, 0.0, std::sqrt(params.p2));
  m.M_minus_abs =
      CMat2(std::sqrt(1.0 - params.p1), 0.0, 0.0, std::sqrt(1.0 - params.p2));
  m.E_plus = m.M_plus_abs * m.M_plus_abs;
  m.E_minus = m.M_minus_abs * m.M_minus_abs;
  m.U = herm_exp(params.H, params.tau, params.hbar);
  m.U_plus = herm_exp(params.H_plus, params.tau, params.hbar);
  m.U_minus = herm_exp(params.H_minus, params.tau, params.hbar);
  m.M_plus = m.U_plus * m.M_plus_abs;
  m.M_minus = m.U_minus * m.M_minus_abs;
  m.H_av = m.p0 * params.H_plus + (1.0 - m.p0) * params.H_minus;
  m.delta_H = params.H_minus - params.H_plus;
  m.norm_H = op_norm(params.H);
  m.norm_H_plus = op_norm(params.H_plus);
  m.norm_H_minus = op_norm(params.H_minus);
  return m;
}

std::pair<double, double> outcome_probabilities(const DensityMatrix& rho,
                                                const DerivedModel& model) {
  double pp = std::real(trace(model.E_plus * rho.m));
  double pm = std::real(trace(model.E_minus * rho.m));
  pp = std::clamp(pp, 0.0, 1.0);
  pm = std::clamp(pm, 0.0, 1.0);
  return {pp, pm};
}

static RegimeStatus classify(double v) {
  if (v >= 0.5) return RegimeStatus::Violated;
  if (v >= 0.1) return RegimeStatus::Warn;
  return RegimeStatus::Pass;
}

RegimeReport check_regime(const DerivedModel& model, int n_per_chunk) {
  if (n_per_chunk < 1)
    throw std::invalid_argument("check_regime: n_per_chunk must be >= 1");
  const double n = static_cast<double>(n_per_chunk);
  const double dt = n * model.params.tau;
  const double hbar = model.params.hbar;
  RegimeReport rep;
  rep.items = {
      {"1/n", 1.0 / n, RegimeStatus::Pass},
      {"n*delta_p", n * model.delta_p, RegimeStatus::Pass},
      {"dt*|H|/hbar", dt * model.norm_H / hbar, RegimeStatus::Pass},
      {"dt*max|H+-|/hbar",
       dt * std::max(model.norm_H_plus, model.norm_H_minus) / hbar,
       RegimeStatus::Pass},
  };
  for (auto& q : rep.items) {
    q.status = classify(q.value);
    rep.any_warn = rep.any_warn || q.status == RegimeStatus::Warn;
    rep.any_violated = rep.any_violated || q.status == RegimeStatus::Violated;
  }
  return rep;
}

const char* to_string(RegimeStatus s) {
  switch (s) {
    case RegimeStatus::Pass:
      return "pass";
    case RegimeStatus::Warn:
      return "warn";
    default:
      return "violated";
  }
}

}  // namespace uqsim
