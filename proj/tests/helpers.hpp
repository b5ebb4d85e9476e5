#pragma once

// Shared test fixtures: seeded random states, Hermitian operators and
// measurement models, plus matrix comparison shorthands.

#include <cmath>
#include <numbers>

#include "uqsim/mat2.hpp"
#include "uqsim/model.hpp"
#include "uqsim/rng.hpp"

namespace uqtest {

inline double max_diff(const uqsim::CMat2& a, const uqsim::CMat2& b) {
  return uqsim::max_abs(a - b);
}

inline uqsim::CMat2 random_hermitian(uqsim::RandomStream& rng, double scale) {
  auto u = [&rng, scale] { return (2.0 * rng.uniform01() - 1.0) * scale; };
  double c0 = u(), cx = u(), cy = u(), cz = u();
  return uqsim::from_pauli(c0, cx, cy, cz);
}

// Uniform direction, radius biased toward the surface so mixed and
// near-pure states both show up.
inline uqsim::DensityMatrix random_state(uqsim::RandomStream& rng) {
  double z = 2.0 * rng.uniform01() - 1.0;
  double phi = 2.0 * std::numbers::pi * rng.uniform01();
  double r = 0.999 * std::cbrt(rng.uniform01());
  double sxy = std::sqrt(std::max(0.0, 1.0 - z * z));
  return uqsim::DensityMatrix::from_bloch(r * sxy * std::cos(phi),
                                          r * sxy * std::sin(phi), r * z);
}

// p1 in [0.10, 0.45], p2 in [p1 + 0.05, 0.90], tau near 0.01. h_scale 0
// leaves all Hamiltonians zero.
inline uqsim::ModelParams random_params(uqsim::RandomStream& rng,
                                        double h_scale = 0.2) {
  uqsim::ModelParams p;
  p.p1 = 0.10 + 0.35 * rng.uniform01();
  p.p2 = p.p1 + 0.05 + (0.90 - p.p1 - 0.05) * rng.uniform01();
  p.tau = 0.01 * (0.5 + rng.uniform01());
  if (h_scale > 0.0) {
    p.H = random_hermitian(rng, h_scale);
    p.H_plus = random_hermitian(rng, h_scale);
    p.H_minus = random_hermitian(rng, h_scale);
  }
  return p;
}

}  // namespace uqtest
