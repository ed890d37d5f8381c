#include "lrplab/pdmp_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lrplab/quadrature.hpp"

namespace lrplab {

double flow(double y0, double t, const BanditParams& params) noexcept {
  if (t == 0.0) {
    return y0;
  }
  const double ra = params.r_A();
  return ra + (y0 - ra) * std::exp(-params.p_A * t);
}

double cumulative_intensity(double y0, double t, const BanditParams& params, double g) noexcept {
  const double ra = params.r_A();
  const double a = params.p_A;
  return params.p_B / g * (ra * t - (y0 - ra) / a * std::expm1(-a * t));
}

double invert_intensity(double y0, double e, const BanditParams& params, double g) {
  if (!(e >= 0.0)) {
    throw std::invalid_argument("invert_intensity: target must be non-negative");
  }
  if (e == 0.0) {
    return 0.0;
  }
  const double ra = params.r_A();
  if (y0 == ra) {
    return e * g / (params.p_B * ra);
  }
  const double scale = params.p_B / g;
  const auto lam = [&](double t) { return cumulative_intensity(y0, t, params, g) - e; };

  double lo = 0.0;
  double hi = e / (scale * std::max(y0, ra));
  while (lam(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  double t = 0.5 * (lo + hi);
  const double tol = 1e-13 * std::max(1.0, e);
  for (int it = 0; it < 200; ++it) {
    const double f = lam(t);
    if (std::abs(f) <= tol) {
      break;
    }
    (f < 0.0 ? lo : hi) = t;
    const double rate = scale * flow(y0, t, params);
    double next = rate > 0.0 ? t - f / rate : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (next == t || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      break;
    }
    t = next;
  }
  return t;
}

double sample_jump_time(double y0, const BanditParams& params, double g, Rng& rng) {
  return invert_intensity(y0, rng.exponential(), params, g);
}

double PdmpPath::value_at(double t) const {
  const auto it = std::upper_bound(jumps.begin(), jumps.end(), t,
                                   [](double v, const PdmpJump& j) { return v < j.time; });
  if (it == jumps.begin()) {
    return flow(y0, t, params);
  }
  const PdmpJump& j = *(it - 1);
  return flow(j.post, t - j.time, params);
}

PdmpPath simulate_path(double y0, double horizon, const BanditParams& params, double g, Rng& rng) {
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("simulate_path: horizon must be positive");
  }
  if (!(g > 0.0)) {
    throw std::invalid_argument("simulate_path: g must be positive");
  }
  if (!(y0 >= 0.0)) {
    throw std::invalid_argument("simulate_path: y0 must be non-negative");
  }
  PdmpPath path;
  path.params = params;
  path.g = g;
  path.y0 = y0;
  path.horizon = horizon;
  if (params.gap() > 0.0) {
    // About (p_B/g) E[Y] T jumps once stationary.
    const double level = std::max(y0, (1.0 - params.p_A) / params.gap());
    const double expected = params.p_B / g * level * horizon;
    if (expected < 5e7) {
      path.jumps.reserve(static_cast<std::size_t>(expected * 1.05) + 16);
    }
  }
  double t = 0.0;
  double y = y0;
  for (;;) {
    const double tau = sample_jump_time(y, params, g, rng);
    if (t + tau >= horizon) {
      break;
    }
    t += tau;
    const double pre = flow(y, tau, params);
    y = pre + g;
    path.jumps.push_back({t, pre, y});
  }
  return path;
}

HistogramBins HistogramBins::defaults(const BanditParams& params, double g) {
  const double ra = params.r_A();
  const double span = 10.0 * std::max(1.0, g);
  return {ra, ra + span, static_cast<std::size_t>(std::llround(span / 0.05))};
}

OccupationHistogram::OccupationHistogram(const HistogramBins& b) : bins(b), weights(b.count, 0.0) {
  if (!(b.hi > b.lo) || b.count == 0) {
    throw std::invalid_argument("HistogramBins: need lo < hi and count > 0");
  }
}

std::vector<double> OccupationHistogram::normalized() const {
  std::vector<double> out(weights.size(), 0.0);
  if (total_time > 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = weights[i] / total_time;
    }
  }
  return out;
}

std::vector<double> OccupationHistogram::density() const {
  std::vector<double> out = normalized();
  const double w = bins.width();
  for (double& v : out) {
    v /= w;
  }
  return out;
}

void OccupationHistogram::merge(const OccupationHistogram& other) {
  if (other.bins.lo != bins.lo || other.bins.hi != bins.hi || other.bins.count != bins.count) {
    throw std::invalid_argument("OccupationHistogram::merge: bins differ");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
  }
  underflow += other.underflow;
  overflow += other.overflow;
  total_time += other.total_time;
}

namespace {

// Calls fn(y_start, duration) for each flow piece of the path inside [t0, t1].
template <class Fn>
void for_each_segment(const PdmpPath& path, double t0, double t1, Fn&& fn) {
  const auto& jumps = path.jumps;
  auto it = std::upper_bound(jumps.begin(), jumps.end(), t0,
                             [](double v, const PdmpJump& j) { return v < j.time; });
  double seg_start = it == jumps.begin() ? 0.0 : (it - 1)->time;
  double seg_value = it == jumps.begin() ? path.y0 : (it - 1)->post;
  for (;; ++it) {
    const double seg_end = it == jumps.end() ? path.horizon : it->time;
    const double a = std::max(t0, seg_start);
    const double b = std::min(t1, seg_end);
    if (b > a) {
      fn(a == seg_start ? seg_value : flow(seg_value, a - seg_start, path.params), b - a);
    }
    if (it == jumps.end() || seg_end >= t1) {
      break;
    }
    seg_start = it->time;
    seg_value = it->post;
  }
}

struct BatchWindows {
  double start;
  double length;
  int count;
};

BatchWindows batch_windows(const PdmpPath& path, double burn_in_fraction, int batches) {
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw std::invalid_argument("burn_in_fraction must lie in [0, 1)");
  }
  if (batches < 2) {
    throw std::invalid_argument("need at least two batches");
  }
  const double start = burn_in_fraction * path.horizon;
  return {start, (path.horizon - start) / batches, batches};
}

Estimate batch_estimate(const std::vector<double>& values) {
  const auto b = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) {
    mean += v;
  }
  mean /= b;
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(ss / (b - 1.0) / b)};
}

}  // namespace

OccupationHistogram occupation_histogram(const PdmpPath& path, const HistogramBins& bins,
                                         double burn_in) {
  OccupationHistogram h(bins);
  const double ra = path.params.r_A();
  const double inv_a = 1.0 / path.params.p_A;
  const double w = bins.width();
  const auto n_bins = static_cast<std::ptrdiff_t>(bins.count);

  // Bin index of y, with -1 for underflow and count for overflow.
  const auto bin_of = [&](double y) -> std::ptrdiff_t {
    if (y < bins.lo) return -1;
    if (y >= bins.hi) return n_bins;
    return std::min(static_cast<std::ptrdiff_t>((y - bins.lo) / w), n_bins - 1);
  };
  const auto add = [&](std::ptrdiff_t k, double dt) {
    if (k < 0) {
      h.underflow += dt;
    } else if (k >= n_bins) {
      h.overflow += dt;
    } else {
      h.weights[static_cast<std::size_t>(k)] += dt;
    }
  };

  for_each_segment(path, burn_in, path.horizon, [&](double ys, double dt) {
    h.total_time += dt;
    const double ye = flow(ys, dt, path.params);
    std::ptrdiff_t k = bin_of(ys);
    const std::ptrdiff_t k_end = bin_of(ye);
    if (k == k_end || ys == ra) {
      add(k, dt);
      return;
    }
    // Monotone toward r_A: walk the crossed edges, timing each by inverting the flow.
    const double c = ys - ra;
    const int dir = ye < ys ? -1 : 1;
    double t_prev = 0.0;
    while (k != k_end) {
      const std::ptrdiff_t edge_index = dir < 0 ? k : k + 1;
      const double edge = bins.lo + w * static_cast<double>(edge_index);
      double t_cross = -inv_a * std::log((edge - ra) / c);
      if (!(t_cross > t_prev)) t_cross = t_prev;
      t_cross = std::min(t_cross, dt);
      add(k, t_cross - t_prev);
      t_prev = t_cross;
      k += dir;
    }
    add(k, dt - t_prev);
  });
  return h;
}

ErgodicMoments ergodic_moments(const PdmpPath& path, double burn_in_fraction, int batches) {
  const BatchWindows win = batch_windows(path, burn_in_fraction, batches);
  const double ra = path.params.r_A();
  const double a = path.params.p_A;
  std::vector<double> m1(win.count);
  std::vector<double> m2(win.count);
  double s1 = 0.0;
  double s2 = 0.0;
  for (int b = 0; b < win.count; ++b) {
    const double t0 = win.start + b * win.length;
    const double t1 = b + 1 == win.count ? path.horizon : t0 + win.length;
    double i1 = 0.0;
    double i2 = 0.0;
    for_each_segment(path, t0, t1, [&](double ys, double dt) {
      const double c = ys - ra;
      const double e1 = -std::expm1(-a * dt);
      const double e2 = -std::expm1(-2.0 * a * dt);
      i1 += ra * dt + c / a * e1;
      i2 += ra * ra * dt + 2.0 * ra * c * e1 / a + c * c * e2 / (2.0 * a);
    });
    m1[b] = i1 / (t1 - t0);
    m2[b] = i2 / (t1 - t0);
    s1 += i1;
    s2 += i2;
  }
  const double total = path.horizon - win.start;
  const double mean = s1 / total;
  const double var = s2 / total - mean * mean;
  std::vector<double> vb(win.count);
  for (int b = 0; b < win.count; ++b) {
    vb[b] = m2[b] - m1[b] * m1[b];
  }
  ErgodicMoments out;
  out.mean = {mean, batch_estimate(m1).std_error};
  out.variance = {var, batch_estimate(vb).std_error};
  out.averaged_time = total;
  return out;
}

Estimate time_average(const PdmpPath& path, const std::function<double(double)>& f,
                      double burn_in_fraction, int batches) {
  const BatchWindows win = batch_windows(path, burn_in_fraction, batches);
  const GaussRule& rule = gauss_legendre_8();
  std::vector<double> avg(win.count);
  double total_integral = 0.0;
  for (int b = 0; b < win.count; ++b) {
    const double t0 = win.start + b * win.length;
    const double t1 = b + 1 == win.count ? path.horizon : t0 + win.length;
    double integral = 0.0;
    for_each_segment(path, t0, t1, [&](double ys, double dt) {
      integral +=
          integrate_rule(rule, 0.0, dt, [&](double s) { return f(flow(ys, s, path.params)); });
    });
    avg[b] = integral / (t1 - t0);
    total_integral += integral;
  }
  return {total_integral / (path.horizon - win.start), batch_estimate(avg).std_error};
}

double generator(const std::function<double(double)>& f,
                 const std::function<double(double)>& df, double y, const BanditParams& params,
                 double g) {
  return params.p_B * y * (f(y + g) - f(y)) / g + (1.0 - params.p_A - params.p_A * y) * df(y);
}

}  // namespace lrplab
