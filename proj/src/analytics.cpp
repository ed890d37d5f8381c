#include "lrplab/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>


namespace lrplab {

double psi_rhs(double u, const BanditParams& params, double g) noexcept {
  return -params.p_A * u + params.p_B * std::expm1(g * u) / g;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepResult {
  double psi;
  double integral;
  double err_psi;
  double err_integral;
  double k7;
};

// One step for (psi, int psi); k1 is G(psi) at the start (FSAL).
StepResult dp_step(double y, double k1, double h, const BanditParams& params, double g) {
  const auto f = [&](double u) { return psi_rhs(u, params, g); };
  const double y2 = y + h * a21 * k1;
  const double k2 = f(y2);
  const double y3 = y + h * (a31 * k1 + a32 * k2);
  const double k3 = f(y3);
  const double y4 = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
  const double k4 = f(y4);
  const double y5 = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
  const double k5 = f(y5);
  const double y6 = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
  const double k6 = f(y6);
  const double y7 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const double k7 = f(y7);
  // The integral's stages are the psi stage values themselves.
  const double integral = h * (b1 * y + b3 * y3 + b4 * y4 + b5 * y5 + b6 * y6);
  const double err_integral = h * (e1 * y + e3 * y3 + e4 * y4 + e5 * y5 + e6 * y6 + e7 * y7);
  const double err_psi = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  return {y7, integral, err_psi, err_integral, k7};
}

}  // namespace

PsiResult solve_psi(double p, PsiBranch branch, const BanditParams& params, double g,
                    const PsiOptions& options) {
  if (!(p >= 0.0)) {
    throw std::invalid_argument("solve_psi: p must be non-negative");
  }
  if (!(g > 0.0)) {
    throw std::invalid_argument("solve_psi: g must be positive");
  }
  const double pi = params.gap();
  if (!(pi > 0.0)) {
    throw std::domain_error("solve_psi: requires p_A > p_B");
  }
  const double cap = 10.0 * critical_exponent(params, g);

  PsiSolution sol;
  sol.psi0 = branch == PsiBranch::Laplace ? -p : p;
  double t = 0.0;
  double y = sol.psi0;
  double k1 = psi_rhs(y, params, g);
  sol.t.push_back(t);
  sol.psi.push_back(y);

  const double stop = options.tol * p;
  double h = std::min(0.1, 0.1 / std::max(1.0, std::abs(k1)));
  while (std::abs(y) > stop && t < options.t_max) {
    h = std::min(h, options.t_max - t);
    const StepResult s = dp_step(y, k1, h, params, g);
    const double scale = options.abs_tol * (1.0 + std::abs(y));
    const double err = std::max(std::abs(s.err_psi), std::abs(s.err_integral)) / scale;
    if (!(err <= 1.0)) {
      h *= std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      if (h < 1e-14) {
        return BlowUp{t, y};
      }
      continue;
    }
    t += h;
    y = s.psi;
    k1 = s.k7;
    sol.integral += s.integral;
    sol.error_bound += std::abs(s.err_integral);
    sol.t.push_back(t);
    sol.psi.push_back(y);
    if (branch == PsiBranch::ExpMoment && y > cap) {
      return BlowUp{t, y};
    }
    h *= err > 0.0 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;
  }
  sol.horizon = t;
  if (y != 0.0) {
    // |psi| decays at a rate between pi and -G(psi_T)/psi_T after T.
    const double a = y / pi;
    const double b = y / (-psi_rhs(y, params, g) / y);
    sol.tail_lo = std::min(a, b);
    sol.tail_hi = std::max(a, b);
    sol.tail_estimate = 0.5 * (a + b);
  }
  return sol;
}

LaplaceValue laplace_nu(double p, const BanditParams& params, double g, double tol) {
  if (!(p >= 0.0)) {
    throw std::invalid_argument("laplace_nu: p must be non-negative");
  }
  if (!(params.gap() > 0.0)) {
    throw std::domain_error("laplace_nu: requires p_A > p_B");
  }
  if (p == 0.0) {
    return {1.0, 1.0, 1.0};
  }
  PsiOptions opt;
  opt.tol = tol;
  const PsiSolution sol = std::get<PsiSolution>(solve_psi(p, PsiBranch::Laplace, params, g, opt));
  const double q = 1.0 - params.p_A;
  return {std::exp(q * (sol.integral + sol.tail_estimate)),
          std::exp(q * (sol.integral + sol.tail_lo - sol.error_bound)),
          std::min(1.0, std::exp(q * (sol.integral + sol.tail_hi + sol.error_bound)))};
}

namespace {

// (e^t - 1)/t and its derivative.
double expm1_ratio(double t) {
  if (std::abs(t) < 1e-4) {
    return 1.0 + t * (0.5 + t * (1.0 / 6 + t / 24));
  }
  return std::expm1(t) / t;
}

double expm1_ratio_deriv(double t) {
  if (std::abs(t) < 1e-4) {
    return 0.5 + t * (1.0 / 3 + t / 8);
  }
  return (std::exp(t) * (t - 1.0) + 1.0) / (t * t);
}

}  // namespace

ThetaRoot theta_root(double y) {
  if (!(y > 1.0)) {
    throw std::domain_error("theta_root: need y > 1");
  }
  double lo = std::log(y);
  double hi = 2.0 * (y - 1.0);
  // Start from the left end: the map is convex, so one Newton step from the
  // right of the root stays on the right.
  double t = lo;
  for (int it = 0; it < 400; ++it) {
    const double f = expm1_ratio(t) - y;
    if (f == 0.0) {
      break;
    }
    (f < 0.0 ? lo : hi) = t;
    double next = t - f / expm1_ratio_deriv(t);
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - t) <= 1e-16 * std::max(1.0, t)) {
      t = next;
      break;
    }
    t = next;
  }
  return {y, t, std::abs(expm1_ratio(t) - y) / y};
}

double critical_exponent(const BanditParams& params, double g) {
  if (!(params.gap() > 0.0)) {
    throw std::domain_error("critical_exponent: requires p_A > p_B");
  }
  if (!(g > 0.0)) {
    throw std::invalid_argument("critical_exponent: g must be positive");
  }
  return theta_root(params.p_A / params.p_B).theta / g;
}

const char* to_string(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::Diverges:
      return "Diverges";
    case BoundaryClass::FinitePositive:
      return "FinitePositive";
    case BoundaryClass::Zero:
      return "Zero";
  }
  return "unknown";
}

BoundaryClass boundary_classification(const BanditParams& params, double g) {
  const double d = derived_constants(params, g).d;
  if (std::abs(d - 1.0) <= 1e-12) {
    return BoundaryClass::FinitePositive;
  }
  return d > 1.0 ? BoundaryClass::Zero : BoundaryClass::Diverges;
}

double pi_zero_normalizer(double p_A, double g) {
  if (!(p_A > 0.0 && p_A < 1.0)) {
    throw std::invalid_argument("pi_zero_normalizer: p_A must lie in (0, 1)");
  }
  if (!(g > 0.0)) {
    throw std::invalid_argument("pi_zero_normalizer: g must be positive");
  }
  const double alpha = 2.0 * (1.0 - p_A) / p_A / g - 1.0;
  // 1 / int_{-1}^{1} (1 - y^2)^alpha dy, a Beta function.
  return std::exp(std::lgamma(alpha + 1.5) - std::lgamma(alpha + 1.0)) / std::sqrt(M_PI);
}

std::vector<double> pi_zero_density(double p_A, double g, const std::vector<double>& grid) {
  const double c = pi_zero_normalizer(p_A, g);
  const double alpha = 2.0 * (1.0 - p_A) / p_A / g - 1.0;
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double y = grid[i];
    if (y > -1.0 && y < 1.0) {
      out[i] = c * std::pow((1.0 - y) * (1.0 + y), alpha);
    }
  }
  return out;
}

}  // namespace lrplab
