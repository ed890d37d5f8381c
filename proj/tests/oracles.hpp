#pragma once

// Reference implementations used only by the tests. None of them call into the
// library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

/// Root of f on [lo, hi] by plain bisection; f(lo) and f(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iterations = 200) {
  double flo = f(lo);
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-12, int depth = 50) {
  struct Rec {
    const std::function<double(double)>& f;
    double operator()(double a, double b, double fa, double fm, double fb, double whole,
                      double tol, int depth) const {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6 * (fa + 4 * flm + fm);
      const double right = (b - m) / 6 * (fm + 4 * frm + fb);
      const double delta = left + right - whole;
      if (depth <= 0 || std::abs(delta) <= 15 * tol) return left + right + delta / 15;
      return (*this)(a, m, fa, flm, fm, left, tol / 2, depth - 1) +
             (*this)(m, b, fm, frm, fb, right, tol / 2, depth - 1);
    }
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return Rec{f}(a, b, fa, fm, fb, whole, tol, depth);
}

/// Fixed-step classical RK4 for y' = rhs(y), autonomous. Returns y at each step.
inline std::vector<double> rk4(const std::function<double(double)>& rhs, double y0, double h,
                               int steps) {
  std::vector<double> out{y0};
  double y = y0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = rhs(y);
    const double k2 = rhs(y + 0.5 * h * k1);
    const double k3 = rhs(y + 0.5 * h * k2);
    const double k4 = rhs(y + h * k3);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    out.push_back(y);
  }
  return out;
}

/// First jump time of the clock with rate p_B y(t)/g along y' = (1 - p_A) - p_A y,
/// by thinning against the constant bound p_B max(y0, r_A)/g. The flow is
/// integrated with RK4 between candidate times so no closed form is used.
class ThinningSampler {
 public:
  ThinningSampler(double p_A, double p_B, double g, std::uint64_t seed)
      : p_A_(p_A), p_B_(p_B), g_(g), eng_(seed) {}

  double operator()(double y0) {
    const double r_A = (1.0 - p_A_) / p_A_;
    const double bound = p_B_ * std::max(y0, r_A) / g_;
    std::exponential_distribution<double> expo(bound);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double t = 0.0;
    double y = y0;
    for (;;) {
      const double dt = expo(eng_);
      y = advance(y, dt);
      t += dt;
      if (unif(eng_) * bound <= p_B_ * y / g_) return t;
    }
  }

 private:
  double advance(double y, double dt) const {
    const int steps = std::max(1, static_cast<int>(std::ceil(dt / 0.01)));
    const double h = dt / steps;
    const auto rhs = [this](double u) { return (1.0 - p_A_) - p_A_ * u; };
    return rk4(rhs, y, h, steps).back();
  }

  double p_A_, p_B_, g_;
  std::mt19937_64 eng_;
};

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

/// Asymptotic two-sample KS critical value at level alpha.
inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

/// The four outcomes of one recursion step from x, written out directly.
struct Atom {
  double prob;
  double next;
};
inline std::vector<Atom> atoms(double x, double gamma, double rho, double p_A, double p_B) {
  return {{x * p_A, x + gamma * (1 - x)},
          {x * (1 - p_A), x - gamma * rho * x},
          {(1 - x) * p_B, x - gamma * x},
          {(1 - x) * (1 - p_B), x + gamma * rho * (1 - x)}};
}

/// L1 distance between two probability vectors plus leftover masses.
inline double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace oracle
