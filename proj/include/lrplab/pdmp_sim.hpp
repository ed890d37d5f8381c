#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lrplab/model_params.hpp"
#include "lrplab/rng.hpp"

namespace lrplab {

/// y(t) = r_A + (y0 - r_A) e^(-p_A t).
double flow(double y0, double t, const BanditParams& params) noexcept;

/// Integrated jump rate (p_B/g) int_0^t flow(y0, s) ds.
double cumulative_intensity(double y0, double t, const BanditParams& params, double g) noexcept;

/// The t >= 0 with cumulative_intensity(y0, t) = e, by Newton steps kept
/// inside a bisection bracket.
double invert_intensity(double y0, double e, const BanditParams& params, double g);

/// Waiting time to the next jump from y0.
double sample_jump_time(double y0, const BanditParams& params, double g, Rng& rng);

struct PdmpJump {
  double time;
  double pre;
  double post;
};

struct PdmpPath {
  BanditParams params;
  double g = 1.0;
  double y0 = 0.0;
  double horizon = 0.0;
  std::vector<PdmpJump> jumps;

  /// Value at time t in [0, horizon], right-continuous.
  double value_at(double t) const;
};

/// Exact path on [0, horizon]. Throws std::invalid_argument if horizon <= 0,
/// g <= 0 or y0 < 0.
PdmpPath simulate_path(double y0, double horizon, const BanditParams& params, double g, Rng& rng);

/// Uniform bins of width (hi - lo)/count on [lo, hi].
struct HistogramBins {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 1;

  double width() const noexcept { return (hi - lo) / static_cast<double>(count); }
  double edge(std::size_t i) const noexcept { return lo + width() * static_cast<double>(i); }

  /// Width 0.05 on [r_A, r_A + 10 max(1, g)].
  static HistogramBins defaults(const BanditParams& params, double g);
};

struct OccupationHistogram {
  HistogramBins bins;
  std::vector<double> weights;
  double underflow = 0.0;
  double overflow = 0.0;
  double total_time = 0.0;

  explicit OccupationHistogram(const HistogramBins& b = {});

  /// Fractions of total time per bin.
  std::vector<double> normalized() const;
  /// normalized() divided by the bin width.
  std::vector<double> density() const;
  /// Adds another histogram on identical bins.
  void merge(const OccupationHistogram& other);
};

/// Exact occupation times of the path after `burn_in` time units.
OccupationHistogram occupation_histogram(const PdmpPath& path, const HistogramBins& bins,
                                         double burn_in = 0.0);

struct Estimate {
  double value;
  /// Batch-means standard error.
  double std_error;
};

struct ErgodicMoments {
  Estimate mean;
  Estimate variance;
  double averaged_time;
};

/// Time averages of y and (y - mean)^2 after discarding burn_in_fraction of
/// the horizon, with errors from `batches` equal-time batches.
ErgodicMoments ergodic_moments(const PdmpPath& path, double burn_in_fraction = 0.1,
                               int batches = 32);

/// Time average of f along the path, 8-point Gauss-Legendre on each flow
/// segment.
Estimate time_average(const PdmpPath& path, const std::function<double(double)>& f,
                      double burn_in_fraction = 0.1, int batches = 32);

/// Lf(y) = p_B y (f(y+g) - f(y))/g + (1 - p_A - p_A y) f'(y).
double generator(const std::function<double(double)>& f,
                 const std::function<double(double)>& df, double y, const BanditParams& params,
                 double g);

}  // namespace lrplab
