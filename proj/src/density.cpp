#include "lrplab/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lrplab/quadrature.hpp"

namespace lrplab {

namespace {

constexpr int kRule = 8;

double lagrange(const std::vector<double>& x, std::size_t i, double z) {
  double v = 1.0;
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (l != i) {
      v *= (z - x[l]) / (x[i] - x[l]);
    }
  }
  return v;
}

// S[j][i] = int_{-1}^{x_j} l_i(x) dx on the reference rule.
std::vector<std::vector<double>> integration_matrix(const GaussRule& rule) {
  const std::size_t n = rule.size();
  std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    const double half = 0.5 * (rule.nodes[j] + 1.0);
    for (std::size_t m = 0; m < n; ++m) {
      const double z = -1.0 + half * (rule.nodes[m] + 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        s[j][i] += half * rule.weights[m] * lagrange(rule.nodes, i, z);
      }
    }
  }
  return s;
}

struct Grid {
  SigmaMap map;
  std::vector<double> breaks;  // panel edges on [0, 1]
  std::vector<double> sigma;   // nodes, panel by panel
  std::vector<double> weight;  // Gauss weights on the sigma axis
};

// Uniform panels of width h on [h, 1]; below h, panels graded geometrically
// by 4 toward 0.
Grid make_grid(int panels, double beta, const GaussRule& rule) {
  const int graded = std::max(1, panels / 3);
  const int uniform = std::max(1, panels - graded);
  const double h = 1.0 / (uniform + 1);
  Grid grid;
  grid.map.beta = beta;
  grid.map.u1 = std::ldexp(h, -2 * (graded - 1));
  grid.breaks.push_back(0.0);
  for (int k = graded - 1; k >= 0; --k) {
    grid.breaks.push_back(std::ldexp(h, -2 * k));
  }
  for (int j = 2; j <= uniform + 1; ++j) {
    grid.breaks.push_back(j == uniform + 1 ? 1.0 : j * h);
  }
  for (std::size_t p = 0; p + 1 < grid.breaks.size(); ++p) {
    const double a = grid.breaks[p];
    const double b = grid.breaks[p + 1];
    for (int i = 0; i < kRule; ++i) {
      grid.sigma.push_back(0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[i]);
      grid.weight.push_back(0.5 * (b - a) * rule.weights[i]);
    }
  }
  return grid;
}

struct March {
  std::vector<std::vector<double>> q;  // phi/F at the nodes, q = 1 on interval 0
  std::vector<double> ends;            // phi/F at the right end of each interval
};

March march(const Grid& grid, int n, double r_a, double r, double g, double d,
            const GaussRule& rule, const std::vector<std::vector<double>>& smat) {
  const auto log_fx = [&](double x) { return r * x / g + (d - 1.0) * std::log(x); };
  const std::size_t n_panels = grid.breaks.size() - 1;
  March out{std::vector<std::vector<double>>(n, std::vector<double>(grid.sigma.size(), 1.0)),
            std::vector<double>(n, 1.0)};
  double q_start = 1.0;
  std::vector<double> slope(kRule);
  for (int k = 1; k < n; ++k) {
    double q_panel = q_start;
    for (std::size_t p = 0; p < n_panels; ++p) {
      const double half = 0.5 * (grid.breaks[p + 1] - grid.breaks[p]);
      for (int i = 0; i < kRule; ++i) {
        const std::size_t j = p * kRule + i;
        const double s = grid.sigma[j];
        const double u = grid.map.u(s);
        const double x = g * (k + u);
        const double x_prev = g * (k - 1 + u);
        const double dy = g * grid.map.du(s);
        const double big_g = -(r / g) * (r_a + x - g) / x;
        // phi(y - g)/F(y) = q_{k-1} F(y - g)/F(y).
        slope[i] = big_g * out.q[k - 1][j] * std::exp(log_fx(x_prev) - log_fx(x)) * dy;
      }
      double total = 0.0;
      for (int j = 0; j < kRule; ++j) {
        double acc = 0.0;
        for (int i = 0; i < kRule; ++i) acc += smat[j][i] * slope[i];
        out.q[k][p * kRule + j] = q_panel + half * acc;
        total += rule.weights[j] * slope[j];
      }
      q_panel += half * total;
    }
    q_start = q_panel;
    out.ends[k] = q_start;
  }
  return out;
}

}  // namespace

PiecewiseDensity::PiecewiseDensity(const BanditParams& params, double g, int n_max,
                                   int points_per_interval)
    : params_(params), g_(g), n_max_(n_max) {
  if (!(params.gap() > 0.0)) {
    throw std::domain_error("density_reconstruct: requires p_A > p_B");
  }
  if (!(g > 0.0)) {
    throw std::invalid_argument("density_reconstruct: g must be positive");
  }
  if (n_max < 2) {
    throw std::invalid_argument("density_reconstruct: n_max must be at least 2");
  }
  if (points_per_interval < 2 * kRule) {
    throw std::invalid_argument("density_reconstruct: points_per_interval must be at least 16");
  }
  const ConstantsBundle c = derived_constants(params, g);
  r_a_ = c.r_A;
  r_ = c.r;
  d_ = c.d;
  map_.beta = std::max(1.0, 1.0 / d_);
  boundary_ = boundary_classification(params, g);

  const GaussRule rule = gauss_legendre(kRule);
  ref_nodes_ = rule.nodes;
  ref_weights_ = rule.weights;
  bary_.resize(kRule);
  for (int i = 0; i < kRule; ++i) {
    double w = 1.0;
    for (int l = 0; l < kRule; ++l) {
      if (l != i) {
        w /= ref_nodes_[i] - ref_nodes_[l];
      }
    }
    bary_[i] = w;
  }
  const auto smat = integration_matrix(rule);

  const int panels = points_per_interval / kRule;
  Grid grid = make_grid(panels, std::max(1.0, 1.0 / d_), rule);
  const std::size_t n_nodes = grid.sigma.size();

  // Discretization and rounding errors excite slower decaying solutions of
  // the march. Compare against a second grid and stop where the right-end
  // values disagree by more than 1e-3 relative.
  const Grid other = make_grid(2 * panels, grid.map.beta, rule);
  const March fine = march(grid, n_max_, r_a_, r_, g_, d_, rule, smat);
  const March check = march(other, n_max_, r_a_, r_, g_, d_, rule, smat);
  n_used_ = n_max_;
  for (int k = 1; k < n_max_; ++k) {
    const double ref = fine.ends[k];
    if (!(ref > 0.0) || !(std::abs(check.ends[k] - ref) <= 1e-3 * ref)) {
      n_used_ = std::max(k, 2);
      break;
    }
  }
  q_.assign(fine.q.begin(), fine.q.begin() + n_used_);
  q_end_ = fine.ends[n_used_ - 1];
  map_ = grid.map;
  breaks_ = std::move(grid.breaks);
  sigma_ = std::move(grid.sigma);
  weight_ = std::move(grid.weight);

  interval_mass_.assign(n_used_, 0.0);
  for (int k = 0; k < n_used_; ++k) {
    for (std::size_t n = 0; n < n_nodes; ++n) {
      interval_mass_[k] += weight_[n] * weight_density(k, sigma_[n], q_[k][n]);
    }
  }

  // Least-squares slope of log phi over the last half interval.
  const int last = n_used_ - 1;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (std::size_t n = 0; n < n_nodes; ++n) {
    if (sigma_[n] < 0.5) {
      continue;
    }
    const double y = position(last, sigma_[n]);
    const double lp = std::log(q_[last][n]) + log_f(y);
    sx += y;
    sy += lp;
    sxx += y * y;
    sxy += y * lp;
    ++m;
  }
  const double fit = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  tail_start_phi_ = q_end_ * std::exp(log_f(range_end()));
  if (fit < 0.0 && std::isfinite(fit) && tail_start_phi_ > 0.0) {
    tail_rate_ = -fit;
    tail_mass_ = tail_start_phi_ / tail_rate_;
  }

  double total = tail_mass_;
  for (double v : interval_mass_) {
    total += v;
  }
  const double scale = 1.0 / total;
  for (auto& row : q_) {
    for (double& v : row) v *= scale;
  }
  for (double& v : interval_mass_) {
    v *= scale;
  }
  q_end_ *= scale;
  tail_mass_ *= scale;
  tail_start_phi_ *= scale;
  lambda0_ = scale;
}

double PiecewiseDensity::position(int k, double sigma) const noexcept {
  return r_a_ + g_ * (k + map_.u(sigma));
}

double PiecewiseDensity::sigma_of(int k, double y) const noexcept {
  const double u = std::clamp((y - r_a_) / g_ - k, 0.0, 1.0);
  return map_.sigma(u);
}

double PiecewiseDensity::log_f(double y) const noexcept { return log_fx(y - r_a_); }

double PiecewiseDensity::log_fx(double x) const noexcept {
  return r_ * x / g_ + (d_ - 1.0) * std::log(x);
}

double PiecewiseDensity::weight_density(int k, double sigma, double q) const noexcept {
  if (k == 0) {
    // F dy/dsigma = e^(r u) g^d u^(d-1) du/dsigma.
    return q * std::exp(r_ * map_.u(sigma)) * std::pow(g_, d_) * map_.weight0(sigma, d_);
  }
  const double y = position(k, sigma);
  return q * std::exp(log_f(y)) * g_ * map_.du(sigma);
}

double PiecewiseDensity::q_at(int k, double sigma) const {
  if (k == 0) {
    return lambda0_;
  }
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), sigma);
  std::size_t p = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - breaks_.begin() - 1, 0));
  p = std::min(p, breaks_.size() - 2);
  const double a = breaks_[p];
  const double b = breaks_[p + 1];
  const double x = (2.0 * sigma - a - b) / (b - a);
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < kRule; ++i) {
    const double diff = x - ref_nodes_[i];
    const double qi = q_[k][p * kRule + i];
    if (diff == 0.0) {
      return qi;
    }
    const double t = bary_[i] / diff;
    num += t * qi;
    den += t;
  }
  return num / den;
}

double PiecewiseDensity::ratio(double y) const {
  if (y <= r_a_ || y >= range_end()) {
    throw std::out_of_range("PiecewiseDensity::ratio: outside the reconstructed range");
  }
  const int k = std::min(static_cast<int>((y - r_a_) / g_), n_used_ - 1);
  return q_at(k, sigma_of(k, y));
}

double PiecewiseDensity::phi(double y) const {
  if (y <= r_a_) {
    return 0.0;
  }
  if (y >= range_end()) {
    return tail_start_phi_ * std::exp(-tail_rate_ * (y - range_end()));
  }
  const int k = std::min(static_cast<int>((y - r_a_) / g_), n_used_ - 1);
  return q_at(k, sigma_of(k, y)) * std::exp(log_f(y));
}

double PiecewiseDensity::partial_mass(int k, double sigma) const {
  double m = 0.0;
  std::size_t p = 0;
  for (; p + 1 < breaks_.size() && breaks_[p + 1] <= sigma; ++p) {
    for (int i = 0; i < kRule; ++i) {
      const std::size_t n = p * kRule + i;
      m += weight_[n] * weight_density(k, sigma_[n], q_[k][n]);
    }
  }
  if (p + 1 < breaks_.size() && sigma > breaks_[p]) {
    const double a = breaks_[p];
    const double half = 0.5 * (sigma - a);
    for (int i = 0; i < kRule; ++i) {
      const double s = a + half * (ref_nodes_[i] + 1.0);
      m += half * ref_weights_[i] * weight_density(k, s, q_at(k, s));
    }
  }
  return m;
}

double PiecewiseDensity::cdf(double y) const {
  if (y <= r_a_) {
    return 0.0;
  }
  if (y >= range_end()) {
    if (tail_rate_ <= 0.0) {
      return 1.0;
    }
    return 1.0 - tail_start_phi_ / tail_rate_ * std::exp(-tail_rate_ * (y - range_end()));
  }
  const int k = std::min(static_cast<int>((y - r_a_) / g_), n_used_ - 1);
  double m = 0.0;
  for (int j = 0; j < k; ++j) {
    m += interval_mass_[j];
  }
  return m + partial_mass(k, sigma_of(k, y));
}

double PiecewiseDensity::integrate(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (int k = 0; k < n_used_; ++k) {
    for (std::size_t n = 0; n < sigma_.size(); ++n) {
      s += weight_[n] * weight_density(k, sigma_[n], q_[k][n]) * f(position(k, sigma_[n]));
    }
  }
  return s;
}

double PiecewiseDensity::mean() const {
  const double e = range_end();
  double tail = 0.0;
  if (tail_rate_ > 0.0) {
    const double k = tail_rate_;
    tail = tail_start_phi_ * (e / k + 1.0 / (k * k));
  }
  return integrate([](double y) { return y; }) + tail;
}

double PiecewiseDensity::variance() const {
  const double e = range_end();
  double tail = 0.0;
  if (tail_rate_ > 0.0) {
    const double k = tail_rate_;
    tail = tail_start_phi_ * (e * e / k + 2.0 * e / (k * k) + 2.0 / (k * k * k));
  }
  const double m = mean();
  return integrate([](double y) { return y * y; }) + tail - m * m;
}

void PiecewiseDensity::check_interval(int k) const {
  if (k < 0 || k >= n_used_) {
    throw std::out_of_range("PiecewiseDensity: interval index outside the reconstructed range");
  }
}

std::vector<double> PiecewiseDensity::nodes(int k) const {
  check_interval(k);
  std::vector<double> out(sigma_.size());
  for (std::size_t n = 0; n < sigma_.size(); ++n) {
    out[n] = position(k, sigma_[n]);
  }
  return out;
}

std::vector<double> PiecewiseDensity::values(int k) const {
  check_interval(k);
  std::vector<double> out(sigma_.size());
  for (std::size_t n = 0; n < sigma_.size(); ++n) {
    out[n] = q_[k][n] * std::exp(log_f(position(k, sigma_[n])));
  }
  return out;
}

GeneratorResidual stationary_generator_residual(const std::function<double(double)>& f,
                                                const std::function<double(double)>& df,
                                                double support_lo, double support_hi,
                                                const PiecewiseDensity& density) {
  if (!(support_lo <= support_hi)) {
    throw std::invalid_argument("stationary_generator_residual: empty support");
  }
  if (support_hi > density.range_end()) {
    throw std::invalid_argument(
        "stationary_generator_residual: support exceeds the reconstructed range");
  }
  const double g = density.g();
  const double r = density.params().ratio();
  const double ra = density.r_A();
  const double residual = density.integrate([&](double y) {
    return r * y * (f(y + g) - f(y)) / g + (ra - y) * df(y);
  });
  const double scale = density.integrate([&](double y) { return std::abs(df(y)); });
  return {residual, scale};
}

}  // namespace lrplab
