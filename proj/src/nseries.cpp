#include "uqsim/nseries.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace uqsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

double chunk_gamma_dt(const DerivedModel& model, double delta_t) {
  if (!(delta_t > 0)) throw std::invalid_argument("delta_t must be positive");
  double gdt = model.gamma * delta_t;
  if (!(gdt > 0))
    throw std::invalid_argument(
        "gaussian readout requires gamma*delta_t > 0 (delta_p != 0)");
  return gdt;
}

}  // namespace

SGrid SGrid::uniform(double gamma, double delta_t, int points,
                     double span_sigmas) {
  if (points < 2) throw std::invalid_argument("grid needs at least 2 points");
  if (!(gamma > 0) || !(delta_t > 0))
    throw std::invalid_argument("grid width requires gamma, delta_t > 0");
  if (!(span_sigmas > 0))
    throw std::invalid_argument("span_sigmas must be positive");
  double sigma = 1.0 / std::sqrt(gamma * delta_t);
  double smax = span_sigmas * sigma;
  double h = 2.0 * smax / (points - 1);
  SGrid g;
  g.s.resize(points);
  g.w.assign(points, h);
  for (int i = 0; i < points; ++i) g.s[i] = -smax + h * i;
  g.w.front() = 0.5 * h;
  g.w.back() = 0.5 * h;
  return g;
}

QuadratureDiag quadrature_diagnostics(const SGrid& grid,
                                      const DerivedModel& model,
                                      double delta_t) {
  double gdt = chunk_gamma_dt(model, delta_t);
  QuadratureDiag d;
  d.sigma_s = 1.0 / std::sqrt(gdt);
  double h = grid.spacing();
  d.points_per_sigma = h > 0 ? d.sigma_s / h : 0.0;
  d.span = grid.s.empty() ? 0.0 : std::max(std::abs(grid.s.front()),
                                           std::abs(grid.s.back()));
  // Readout Gaussians are centered at +-1; mass of the worse-placed one
  // beyond the grid edge.
  double margin = (d.span - 1.0) / (std::sqrt(2.0) * d.sigma_s);
  d.tail_mass_estimate = margin > 0 ? 0.5 * std::erfc(margin) : 1.0;
  d.resolved = d.points_per_sigma >= 8.0 && d.span >= 1.0 + 6.0 * d.sigma_s;
  return d;
}

CMat2 binomial_element(int n_plus, int n, const DerivedModel& model) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (n_plus < 0 || n_plus > n)
    throw std::invalid_argument("n_plus must lie in [0, n]");
  const int n_minus = n - n_plus;
  const double lchoose = std::lgamma(n + 1.0) - std::lgamma(n_plus + 1.0) -
                         std::lgamma(n_minus + 1.0);
  // 0*log(0) terms are omitted rather than evaluated.
  auto entry = [&](double p) {
    double lg = 0.5 * lchoose;
    if (n_plus > 0) {
      if (p <= 0) return 0.0;
      lg += 0.5 * n_plus * std::log(p);
    }
    if (n_minus > 0) {
      if (p >= 1) return 0.0;
      lg += 0.5 * n_minus * std::log1p(-p);
    }
    return std::exp(lg);
  };
  CMat2 abs_part{entry(model.params.p1), 0.0, 0.0, entry(model.params.p2)};
  const double tau = model.params.tau;
  const double hbar = model.params.hbar;
  CMat2 back = identity();
  if (n_plus > 0) back = herm_exp(model.params.H_plus, n_plus * tau, hbar);
  if (n_minus > 0)
    back = back * herm_exp(model.params.H_minus, n_minus * tau, hbar);
  CMat2 free = herm_exp(model.params.H, n * tau, hbar);
  return back * abs_part * free;
}

GaussianElement gaussian_element(double s, const DerivedModel& model,
                                 double delta_t, bool use_qnumber_width) {
  chunk_gamma_dt(model, delta_t);  // validates gamma * delta_t > 0
  double g1 = model.gamma, g2 = model.gamma;
  if (use_qnumber_width) {
    const double p1 = model.params.p1, p2 = model.params.p2;
    const double tau = model.params.tau;
    if (!(p1 > 0 && p1 < 1 && p2 > 0 && p2 < 1))
      throw std::invalid_argument(
          "level-resolved width requires 0 < p1, p2 < 1");
    g1 = model.delta_p * model.delta_p / (4.0 * p1 * (1.0 - p1) * tau);
    g2 = model.delta_p * model.delta_p / (4.0 * p2 * (1.0 - p2) * tau);
  }
  GaussianElement el;
  el.s = s;
  // The width and the normalization are level-resolved together, which
  // keeps each diagonal of the completeness integral exactly 1 over R.
  double n1 = std::pow(g1 * delta_t / (2.0 * kPi), 0.25);
  double n2 = std::pow(g2 * delta_t / (2.0 * kPi), 0.25);
  // sigma_z eigenvalues +1 (level 1) and -1 (level 2) set the centers.
  double e1 = n1 * std::exp(-g1 * delta_t * (1.0 - s) * (1.0 - s) / 4.0);
  double e2 = n2 * std::exp(-g2 * delta_t * (1.0 + s) * (1.0 + s) / 4.0);
  el.abs_part = CMat2{e1, 0.0, 0.0, e2};
  CMat2 h_s = model.H_av + (s * model.delta_p / 2.0) * model.delta_H;
  el.backaction = herm_exp(h_s, delta_t, model.params.hbar);
  CMat2 free = herm_exp(model.params.H, delta_t, model.params.hbar);
  el.M = el.backaction * el.abs_part * free;
  return el;
}

double s_from_rate(int n_plus, int n, const DerivedModel& model) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (model.delta_p == 0)
    throw std::domain_error("readout scale undefined at delta_p = 0");
  return 2.0 * (model.p0 - static_cast<double>(n_plus) / n) / model.delta_p;
}

RateValue rate_from_s(double s, const DerivedModel& model, int n) {
  RateValue r;
  r.rate = model.p0 - 0.5 * model.delta_p * s;
  r.count = r.rate * n;
  r.physical = r.rate >= 0.0 && r.rate <= 1.0;
  return r;
}

DensityMatrix nseries_nonselective(const DensityMatrix& rho,
                                   const DerivedModel& model, double delta_t,
                                   const NSeriesConfig& cfg, Exec policy) {
  const SGrid& grid = cfg.grid;
  if (grid.s.size() < 2 || grid.s.size() != grid.w.size())
    throw std::invalid_argument("quadrature grid is empty or inconsistent");
  const std::size_t npts = grid.s.size();
  auto chunks = make_chunks(npts, kDefaultChunk);
  std::vector<CMat2> partial(chunks.size(), zero());
  for_each_chunk(npts, kDefaultChunk, policy,
                 [&](std::size_t c, std::size_t b, std::size_t e) {
                   CMat2 acc = zero();
                   for (std::size_t i = b; i < e; ++i) {
                     GaussianElement el = gaussian_element(
                         grid.s[i], model, delta_t, cfg.use_qnumber_width);
                     acc += grid.w[i] * (el.M * rho.m * adjoint(el.M));
                   }
                   partial[c] = acc;
                 });
  CMat2 out = zero();
  for (const CMat2& p : partial) out += p;
  DensityMatrix result;
  result.m = out;
  return result;
}

DensityMatrix binomial_nonselective(const DensityMatrix& rho,
                                    const DerivedModel& model, int n,
                                    Exec policy) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const std::size_t terms = static_cast<std::size_t>(n) + 1;
  auto chunks = make_chunks(terms, kDefaultChunk);
  std::vector<CMat2> partial(chunks.size(), zero());
  for_each_chunk(terms, kDefaultChunk, policy,
                 [&](std::size_t c, std::size_t b, std::size_t e) {
                   CMat2 acc = zero();
                   for (std::size_t a = b; a < e; ++a) {
                     CMat2 m =
                         binomial_element(static_cast<int>(a), n, model);
                     acc += m * rho.m * adjoint(m);
                   }
                   partial[c] = acc;
                 });
  CMat2 out = zero();
  for (const CMat2& p : partial) out += p;
  DensityMatrix result;
  result.m = out;
  return result;
}

CompletenessReport gaussian_completeness(const DerivedModel& model,
                                         double delta_t,
                                         const NSeriesConfig& cfg) {
  const SGrid& grid = cfg.grid;
  if (grid.s.size() < 2 || grid.s.size() != grid.w.size())
    throw std::invalid_argument("quadrature grid is empty or inconsistent");
  // M_s^dag M_s = free^dag |M_s|^2 free; the unitaries drop out of the
  // deviation norm, so only the diagonal magnitudes are accumulated.
  double full1 = 0, full2 = 0, phys1 = 0, phys2 = 0;
  for (std::size_t i = 0; i < grid.s.size(); ++i) {
    GaussianElement el =
        gaussian_element(grid.s[i], model, delta_t, cfg.use_qnumber_width);
    double a = std::norm(el.abs_part(0, 0));
    double b = std::norm(el.abs_part(1, 1));
    full1 += grid.w[i] * a;
    full2 += grid.w[i] * b;
    if (rate_from_s(grid.s[i], model, 1).physical) {
      phys1 += grid.w[i] * a;
      phys2 += grid.w[i] * b;
    }
  }
  CompletenessReport rep;
  rep.full_grid_dev = std::max(std::abs(full1 - 1.0), std::abs(full2 - 1.0));
  rep.physical_range_dev =
      std::max(std::abs(phys1 - 1.0), std::abs(phys2 - 1.0));
  return rep;
}

double binomial_completeness(const DerivedModel& model, int n) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  double sum1 = 0, sum2 = 0;
  for (int a = 0; a <= n; ++a) {
    CMat2 m = binomial_element(a, n, model);
    CMat2 mm = adjoint(m) * m;
    sum1 += mm(0, 0).real();
    sum2 += mm(1, 1).real();
  }
  return std::max(std::abs(sum1 - 1.0), std::abs(sum2 - 1.0));
}

ReadoutMoments readout_moments(const DensityMatrix& rho,
                               const DerivedModel& model, double delta_t,
                               const NSeriesConfig& cfg) {
  const SGrid& grid = cfg.grid;
  if (grid.s.size() < 2 || grid.s.size() != grid.w.size())
    throw std::invalid_argument("quadrature grid is empty or inconsistent");
  CMat2 free = herm_exp(model.params.H, delta_t, model.params.hbar);
  CMat2 evolved = free * rho.m * adjoint(free);
  double mass = 0, m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < grid.s.size(); ++i) {
    GaussianElement el =
        gaussian_element(grid.s[i], model, delta_t, cfg.use_qnumber_width);
    double p = grid.w[i] * (std::norm(el.abs_part(0, 0)) * evolved(0, 0) +
                            std::norm(el.abs_part(1, 1)) * evolved(1, 1))
                               .real();
    mass += p;
    m1 += p * grid.s[i];
    m2 += p * grid.s[i] * grid.s[i];
  }
  ReadoutMoments mom;
  mom.mass = mass;
  if (mass > 0) {
    mom.mean = m1 / mass;
    mom.variance = m2 / mass - mom.mean * mom.mean;
  }
  return mom;
}

double binomial_vs_gaussian_tv(const DensityMatrix& rho,
                               const DerivedModel& model, int n,
                               bool use_qnumber_width) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (model.delta_p == 0)
    throw std::domain_error("comparison undefined at delta_p = 0");
  const double delta_t = n * model.params.tau;
  CMat2 free = herm_exp(model.params.H, delta_t, model.params.hbar);
  CMat2 evolved = free * rho.m * adjoint(free);
  // Lattice spacing of s between adjacent counts.
  const double ds = 2.0 / (n * model.delta_p);
  double tv = 0;
  for (int a = 0; a <= n; ++a) {
    CMat2 mb = binomial_element(a, n, model);
    CMat2 eb = adjoint(mb) * mb;
    double pb = (eb(0, 0) * evolved(0, 0) + eb(1, 1) * evolved(1, 1)).real();
    double s = s_from_rate(a, n, model);
    GaussianElement el = gaussian_element(s, model, delta_t, use_qnumber_width);
    double pg = ds * (std::norm(el.abs_part(0, 0)) * evolved(0, 0) +
                      std::norm(el.abs_part(1, 1)) * evolved(1, 1))
                         .real();
    tv += std::abs(pb - pg);
  }
  return 0.5 * tv;
}

}  // namespace uqsim
