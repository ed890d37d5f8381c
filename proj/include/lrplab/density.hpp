#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "lrplab/analytics.hpp"
#include "lrplab/model_params.hpp"

namespace lrplab {

/// Map from the integration variable sigma in [0, 1] to the offset u in
/// [0, 1] inside an interval: u = u1 (sigma/u1)^beta below u1, u = sigma above.
struct SigmaMap {
  double u1 = 1.0;
  double beta = 1.0;

  template <class T>
  T u(T s) const {
    return s < T(u1) ? T(u1) * std::pow(s / T(u1), T(beta)) : s;
  }
  template <class T>
  T du(T s) const {
    return s < T(u1) ? T(beta) * std::pow(s / T(u1), T(beta) - 1) : T(1);
  }
  double sigma(double u) const { return u < u1 ? u1 * std::pow(u / u1, 1.0 / beta) : u; }
  /// u^(d-1) du/dsigma, finite at sigma = 0 when beta d = 1.
  double weight0(double s, double d) const {
    if (s < u1) {
      return beta * std::pow(u1, d - 1.0) * std::pow(s / u1, beta * d - 1.0);
    }
    return std::pow(s, d - 1.0);
  }
};

/// Stationary density of the jump process, rebuilt interval by interval on
/// (r_A + k g, r_A + (k+1) g), k < intervals(), plus an exponential tail.
///
/// On interval k the position is y = r_A + g (k + u(sigma)), sigma in
/// [0, 1], where u is a SigmaMap with beta = max(1, 1/d): on the first panel
/// the endpoint singularity of (y - r_A)^(d-1) becomes smooth, elsewhere u =
/// sigma. About a third of the panels are graded geometrically toward 0 and
/// the rest are uniform, each carrying a Gauss rule; every interval uses the
/// same nodes, so phi(y - g) is read off the previous interval without
/// interpolation.
///
/// The interval march amplifies discretization and rounding errors
/// geometrically. It is also run on a grid with twice the panels, and stops
/// at the first interval whose right-end values differ by more than 1e-3
/// relative. So intervals() can be less than n_max, and the fitted tail
/// covers the rest of the requested range.
class PiecewiseDensity {
 public:
  PiecewiseDensity(const BanditParams& params, double g, int n_max = 20,
                   int points_per_interval = 256);

  const BanditParams& params() const noexcept { return params_; }
  double g() const noexcept { return g_; }
  int n_max() const noexcept { return n_max_; }
  /// Intervals actually reconstructed, at most n_max.
  int intervals() const noexcept { return n_used_; }
  double r_A() const noexcept { return r_a_; }
  /// Right end of the reconstructed range, r_A + intervals() g.
  double range_end() const noexcept { return r_a_ + g_ * n_used_; }
  double lambda0() const noexcept { return lambda0_; }
  double exponent_d() const noexcept { return d_; }
  BoundaryClass boundary() const noexcept { return boundary_; }
  /// Mass assigned beyond range_end() by the fitted tail.
  double tail_mass() const noexcept { return tail_mass_; }
  /// Decay rate of the fitted tail phi ~ exp(-rate y).
  double tail_rate() const noexcept { return tail_rate_; }

  /// Normalized density; 0 for y <= r_A.
  double phi(double y) const;
  /// phi / F with F(y) = e^(r (y - r_A)/g) (y - r_A)^(d-1); lambda0 on interval 0.
  double ratio(double y) const;
  /// Mass of (-inf, y].
  double cdf(double y) const;
  double mass(double a, double b) const { return cdf(b) - cdf(a); }

  /// Node rule for int f phi over (r_A, range_end()); the tail is excluded.
  double integrate(const std::function<double(double)>& f) const;
  /// First two moments, including the fitted tail.
  double mean() const;
  double variance() const;

  /// Node positions and density values of interval k < intervals(), for
  /// export. Throw std::out_of_range otherwise.
  std::vector<double> nodes(int k) const;
  std::vector<double> values(int k) const;
  /// phi/F at the nodes of interval k.
  const std::vector<double>& ratios(int k) const {
    check_interval(k);
    return q_[k];
  }

 private:
  void check_interval(int k) const;
  double position(int k, double sigma) const noexcept;
  double sigma_of(int k, double y) const noexcept;
  double log_f(double y) const noexcept;
  // log F as a function of x = y - r_A.
  double log_fx(double x) const noexcept;
  // phi dy/dsigma at sigma on interval k, with q given.
  double weight_density(int k, double sigma, double q) const noexcept;
  double q_at(int k, double sigma) const;
  double partial_mass(int k, double sigma) const;

  BanditParams params_;
  double g_;
  int n_max_;
  int n_used_;
  double r_a_;
  double r_;
  double d_;
  SigmaMap map_;
  BoundaryClass boundary_;

  std::vector<double> breaks_;     // panel edges on [0, 1]
  std::vector<double> sigma_;      // all nodes, panel by panel
  std::vector<double> weight_;     // Gauss weights on the sigma axis
  std::vector<double> bary_;       // barycentric weights of the reference rule
  std::vector<double> ref_nodes_;  // reference rule on [-1, 1]
  std::vector<double> ref_weights_;
  std::vector<std::vector<double>> q_;        // phi/F at nodes, per interval
  std::vector<double> interval_mass_;         // normalized mass of each interval
  double q_end_ = 0.0;
  double lambda0_ = 1.0;
  double tail_mass_ = 0.0;
  double tail_rate_ = 0.0;
  double tail_start_phi_ = 0.0;
};

/// int (r y (f(y+g) - f(y))/g + (r_A - y) f'(y)) phi(y) dy over the
/// reconstructed range, and the scale int |f'| phi used to judge it.
struct GeneratorResidual {
  double residual;
  double scale;
};

/// f must vanish outside [support_lo, support_hi]; throws std::invalid_argument
/// if support_hi exceeds the reconstructed range.
GeneratorResidual stationary_generator_residual(const std::function<double(double)>& f,
                                                const std::function<double(double)>& df,
                                                double support_lo, double support_hi,
                                                const PiecewiseDensity& density);

/// Convenience wrapper.
inline PiecewiseDensity density_reconstruct(const BanditParams& params, double g, int n_max = 20,
                                            int points_per_interval = 256) {
  return PiecewiseDensity(params, g, n_max, points_per_interval);
}

}  // namespace lrplab
