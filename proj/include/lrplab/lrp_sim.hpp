#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lrplab/model_params.hpp"
#include "lrplab/rng.hpp"

namespace lrplab {

struct LrpState {
  std::uint64_t n = 0;
  double x = 0.5;
};

enum class AtomLabel { ASuccess, AFailure, BSuccess, BFailure };

struct StepAtom {
  double probability;
  double next_x;
  AtomLabel label;
};

/// The four outcomes of one step from x, in the order
/// A-success, A-failure, B-success, B-failure.
std::array<StepAtom, 4> step_distribution(double x, double gamma, double rho,
                                          const BanditParams& params);

/// Index of the atom selected by a uniform draw u in [0, 1), partitioning
/// [0, 1) by the cumulative atom probabilities.
int select_atom(double x, double u, const BanditParams& params) noexcept;

/// One step with (gamma_{n+1}, rho_{n+1}).
LrpState lrp_step(const LrpState& state, const ScheduleSpec& spec, const BanditParams& params,
                  Rng& rng);

/// Exact conditional moments of the martingale increment at state x.
struct IncrementMoments {
  double mean;
  double second_moment;
  /// p_A (1 - x) + rho^2 (1 - p_B).
  double second_moment_bound;
  /// Conditional second moments of the reward and penalty parts, whose
  /// product vanishes atom by atom.
  double reward_second_moment;
  double penalty_second_moment;
};

IncrementMoments martingale_increment_moments(double x, double rho, const BanditParams& params);

/// Geometric checkpoint grid: n_k = ceil(first * ratio^k), deduplicated, plus
/// the final step.
struct CheckpointGrid {
  double first = 1.0;
  double ratio = 1.7782794100389228;  // 10^(1/4)

  std::vector<std::uint64_t> points(std::uint64_t n_steps) const;
};

struct Trajectory {
  std::vector<std::uint64_t> n;
  std::vector<double> x;
  /// (1 - x_n)/rho_n, or 1 - 2 x_n for the equal-arms run.
  std::vector<double> y;
  LrpState terminal;
  StreamId stream;
  /// Steps where rounding left [0, 1] and x was clamped back.
  std::uint64_t clamp_count = 0;
};

/// Runs the recursion from x0 for n_steps steps on the given stream.
/// Deterministic in (spec, params, x0, n_steps, stream, grid).
Trajectory run_trajectory(const ScheduleSpec& spec, const BanditParams& params, double x0,
                          std::uint64_t n_steps, StreamId stream,
                          const CheckpointGrid& grid = {});

/// Equal arms (p_A = p_B) with the coupled schedule; records y_n = 1 - 2 x_n.
/// Throws std::invalid_argument if the arms differ.
Trajectory run_pi_zero_coupled(const Coupled& schedule, const BanditParams& params, double x0,
                               std::uint64_t n_steps, StreamId stream,
                               const CheckpointGrid& grid = {});

/// Runs `count` trajectories on streams (master_seed, 0..count-1) using up to
/// `jobs` threads. The result is ordered by stream index.
std::vector<Trajectory> run_batch(const ScheduleSpec& spec, const BanditParams& params, double x0,
                                  std::uint64_t n_steps, std::uint64_t master_seed,
                                  std::uint64_t count, unsigned jobs = 1,
                                  const CheckpointGrid& grid = {});

std::vector<Trajectory> run_pi_zero_batch(const Coupled& schedule, const BanditParams& params,
                                          double x0, std::uint64_t n_steps,
                                          std::uint64_t master_seed, std::uint64_t count,
                                          unsigned jobs = 1, const CheckpointGrid& grid = {});

}  // namespace lrplab
