#pragma once

// Closed-form complex 2x2 linear algebra: the numeric substrate for the
// qubit simulator. Everything a 2x2 matrix needs (eigenvalues, square
// roots of positive matrices, polar factors, Hermitian exponentials,
// operator norms) has an exact expression in terms of trace and
// determinant, so nothing here iterates.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace uqsim {

using cplx = std::complex<double>;

struct CMat2 {
  // row-major: e[0]=a11, e[1]=a12, e[2]=a21, e[3]=a22
  std::array<cplx, 4> e{};

  CMat2() = default;
  CMat2(cplx a11, cplx a12, cplx a21, cplx a22) : e{a11, a12, a21, a22} {}

  cplx& operator()(int r, int c) { return e[2 * r + c]; }
  const cplx& operator()(int r, int c) const { return e[2 * r + c]; }

  CMat2& operator+=(const CMat2& o) {
    for (int i = 0; i < 4; ++i) e[i] += o.e[i];
    return *this;
  }
  CMat2& operator-=(const CMat2& o) {
    for (int i = 0; i < 4; ++i) e[i] -= o.e[i];
    return *this;
  }
  CMat2& operator*=(cplx s) {
    for (int i = 0; i < 4; ++i) e[i] *= s;
    return *this;
  }
  bool operator==(const CMat2& o) const { return e == o.e; }
};

inline CMat2 operator+(CMat2 a, const CMat2& b) { return a += b; }
inline CMat2 operator-(CMat2 a, const CMat2& b) { return a -= b; }
inline CMat2 operator-(const CMat2& a) {
  return {-a.e[0], -a.e[1], -a.e[2], -a.e[3]};
}
inline CMat2 operator*(cplx s, CMat2 a) { return a *= s; }
inline CMat2 operator*(CMat2 a, cplx s) { return a *= s; }
inline CMat2 operator*(double s, CMat2 a) { return a *= cplx(s); }
inline CMat2 operator*(CMat2 a, double s) { return a *= cplx(s); }
inline CMat2 operator/(CMat2 a, cplx s) { return a *= (1.0 / s); }
inline CMat2 operator/(CMat2 a, double s) { return a *= cplx(1.0 / s); }

inline CMat2 operator*(const CMat2& a, const CMat2& b) {
  return {a.e[0] * b.e[0] + a.e[1] * b.e[2], a.e[0] * b.e[1] + a.e[1] * b.e[3],
          a.e[2] * b.e[0] + a.e[3] * b.e[2], a.e[2] * b.e[1] + a.e[3] * b.e[3]};
}

inline CMat2 adjoint(const CMat2& a) {
  return {std::conj(a.e[0]), std::conj(a.e[2]), std::conj(a.e[1]),
          std::conj(a.e[3])};
}

inline cplx trace(const CMat2& a) { return a.e[0] + a.e[3]; }
inline cplx det(const CMat2& a) { return a.e[0] * a.e[3] - a.e[1] * a.e[2]; }

inline CMat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
inline CMat2 zero() { return {}; }
inline CMat2 pauli_x() { return {0.0, 1.0, 1.0, 0.0}; }
inline CMat2 pauli_y() {
  return {0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0};
}
inline CMat2 pauli_z() { return {1.0, 0.0, 0.0, -1.0}; }

// H = c0*I + cx*sx + cy*sy + cz*sz, real coefficients -> Hermitian.
inline CMat2 from_pauli(double c0, double cx, double cy, double cz) {
  return {cplx(c0 + cz, 0.0), cplx(cx, -cy), cplx(cx, cy), cplx(c0 - cz, 0.0)};
}

// Pauli coefficients of a Hermitian matrix (real by construction).
inline std::array<double, 4> pauli_coefficients(const CMat2& h) {
  return {0.5 * std::real(h.e[0] + h.e[3]),
          0.5 * std::real(h.e[1] + h.e[2]),
          0.5 * std::imag(h.e[2] - h.e[1]),
          0.5 * std::real(h.e[0] - h.e[3])};
}

inline CMat2 hermitize(const CMat2& a) {
  CMat2 ad = adjoint(a);
  return 0.5 * (a + ad);
}

inline double max_abs(const CMat2& a) {
  double m = 0.0;
  for (const auto& v : a.e) m = std::max(m, std::abs(v));
  return m;
}

inline double frob_norm(const CMat2& a) {
  double s = 0.0;
  for (const auto& v : a.e) s += std::norm(v);
  return std::sqrt(s);
}

// Deviation from Hermiticity, as a max-abs entry difference.
inline double herm_error(const CMat2& a) {
  return max_abs(a - adjoint(a));
}

inline bool is_hermitian(const CMat2& a, double tol = 1e-12) {
  return herm_error(a) <= tol * std::max(1.0, max_abs(a));
}

// Eigenvalues of a Hermitian matrix, ascending.
inline std::array<double, 2> herm_eigvals(const CMat2& a) {
  double t = std::real(trace(a));
  double d = std::real(det(a));
  double disc = t * t - 4.0 * d;
  double s = std::sqrt(std::max(disc, 0.0));
  return {0.5 * (t - s), 0.5 * (t + s)};
}

// Largest singular value.
inline double op_norm(const CMat2& a) {
  CMat2 g = adjoint(a) * a;
  double t = std::real(trace(g));
  double d = std::max(std::real(det(g)), 0.0);
  double disc = std::max(t * t - 4.0 * d, 0.0);
  double lmax = std::max(0.5 * (t + std::sqrt(disc)), 0.0);
  return std::sqrt(lmax);
}

inline CMat2 inverse(const CMat2& a) {
  cplx d = det(a);
  if (std::abs(d) < 1e-300)
    throw std::domain_error("inverse: singular 2x2 matrix");
  cplx inv = 1.0 / d;
  return {a.e[3] * inv, -a.e[1] * inv, -a.e[2] * inv, a.e[0] * inv};
}

inline CMat2 commutator(const CMat2& a, const CMat2& b) {
  return a * b - b * a;
}

inline CMat2 anticommutator(const CMat2& a, const CMat2& b) {
  return a * b + b * a;
}

// exp(-i H t / hbar) for Hermitian H, via the Pauli decomposition
// H = c0*I + c.sigma:  exp(-iHt/hbar) = e^{-i c0 t/hbar}
// (cos(|c|t/hbar) I - i sin(|c|t/hbar) n.sigma).  Exact, no series.
inline CMat2 herm_exp(const CMat2& h, double t, double hbar = 1.0) {
  if (!is_hermitian(h))
    throw std::domain_error("herm_exp: input is not Hermitian");
  auto c = pauli_coefficients(h);
  double r = std::sqrt(c[1] * c[1] + c[2] * c[2] + c[3] * c[3]);
  cplx phase = std::exp(cplx(0.0, -c[0] * t / hbar));
  if (r == 0.0) return phase * identity();
  double phi = r * t / hbar;
  double cp = std::cos(phi), sp = std::sin(phi);
  double nx = c[1] / r, ny = c[2] / r, nz = c[3] / r;
  cplx i(0.0, 1.0);
  CMat2 nsig = from_pauli(0.0, nx, ny, nz);
  return phase * (cp * identity() - (i * sp) * nsig);
}

// Square root of a positive-semidefinite Hermitian matrix:
// sqrt(A) = (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A)).
inline CMat2 matrix_sqrt_pos(const CMat2& a) {
  if (!is_hermitian(a))
    throw std::domain_error("matrix_sqrt_pos: input is not Hermitian");
  auto ev = herm_eigvals(hermitize(a));
  double scale = std::max(1.0, std::abs(ev[1]));
  if (ev[0] < -1e-12 * scale)
    throw std::domain_error("matrix_sqrt_pos: input is not positive");
  double l1 = std::max(ev[0], 0.0), l2 = std::max(ev[1], 0.0);
  double s = std::sqrt(l1) + std::sqrt(l2);
  if (s == 0.0) return zero();
  double g = std::sqrt(l1 * l2);
  return (hermitize(a) + g * identity()) / s;
}

struct PolarForm {
  CMat2 unitary;
  CMat2 positive;
};

// M = U P with P = sqrt(M^dag M) positive and U unitary.  Requires M
// nonsingular so that U is unique.
inline PolarForm polar_decompose(const CMat2& m) {
  if (std::abs(det(m)) <= 1e-14)
    throw std::domain_error("polar_decompose: matrix is singular");
  CMat2 p = matrix_sqrt_pos(adjoint(m) * m);
  CMat2 u = m * inverse(p);
  return {u, p};
}

// Half trace norm of (rho - sigma); both arguments are expected Hermitian,
// the difference is symmetrized before diagonalizing.
inline double trace_distance(const CMat2& rho, const CMat2& sigma) {
  auto ev = herm_eigvals(hermitize(rho - sigma));
  return 0.5 * (std::abs(ev[0]) + std::abs(ev[1]));
}

// (rho + rho^dag)/2, rescaled to unit trace.
inline CMat2 renormalize(const CMat2& rho) {
  CMat2 h = hermitize(rho);
  double t = std::real(trace(h));
  if (std::abs(t) < 1e-300)
    throw std::domain_error("renormalize: trace is zero");
  return h / t;
}

// Qubit state wrapper. Kept deliberately thin: construction from raw
// matrices does not validate so hot loops stay cheap; callers that want
// the state-space invariants use validate() or from_matrix().
struct DensityMatrix {
  CMat2 m = {0.5, 0.0, 0.0, 0.5};

  DensityMatrix() = default;
  explicit DensityMatrix(const CMat2& mat) : m(mat) {}

  static DensityMatrix from_bloch(double x, double y, double z) {
    double r = std::sqrt(x * x + y * y + z * z);
    if (r > 1.0 + 1e-12)
      throw std::invalid_argument(
          "DensityMatrix::from_bloch: vector leaves the Bloch ball (|r| = " +
          std::to_string(r) + ")");
    return DensityMatrix(0.5 * from_pauli(1.0, x, y, z));
  }

  static DensityMatrix from_matrix(const CMat2& mat, double tol = 1e-12) {
    DensityMatrix rho(mat);
    auto issues = rho.validate(tol);
    if (!issues.empty()) {
      std::string msg = "DensityMatrix::from_matrix:";
      for (const auto& s : issues) msg += " " + s + ";";
      throw std::invalid_argument(msg);
    }
    return rho;
  }

  std::array<double, 3> bloch() const {
    return {2.0 * std::real(m.e[1]), -2.0 * std::imag(m.e[1]),
            std::real(m.e[0] - m.e[3])};
  }

  double purity() const { return std::real(trace(m * m)); }
  double trace_dev() const { return std::abs(trace(m) - cplx(1.0)); }
  double min_eig() const { return herm_eigvals(hermitize(m))[0]; }

  std::vector<std::string> validate(double tol = 1e-12) const {
    std::vector<std::string> issues;
    if (herm_error(m) > tol)
      issues.push_back("not Hermitian (dev " + std::to_string(herm_error(m)) +
                       ")");
    if (trace_dev() > tol)
      issues.push_back("trace differs from 1 by " +
                       std::to_string(trace_dev()));
    if (min_eig() < -tol)
      issues.push_back("negative eigenvalue " + std::to_string(min_eig()));
    return issues;
  }
};

inline DensityMatrix renormalize(const DensityMatrix& rho) {
  return DensityMatrix(renormalize(rho.m));
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance(a.m, b.m);
}

}  // namespace uqsim
