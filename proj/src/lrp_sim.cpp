#include "lrplab/lrp_sim.hpp"

#include <cmath>
#include <memory>
#include <variant>
#include <stdexcept>

#include "lrplab/parallel.hpp"

namespace lrplab {

namespace {

// Every outcome moves x by gamma (c0 + c1 x).
struct Move {
  double c0;
  double c1;
};

inline Move move_for(int atom, double rho) noexcept {
  switch (atom) {
    case 0:
      return {1.0, -1.0};
    case 1:
      return {0.0, -rho};
    case 2:
      return {0.0, -1.0};
    default:
      return {rho, -rho};
  }
}

inline double advance(double x, double gamma, Move m) noexcept { return x + gamma * (m.c0 + m.c1 * x); }

}  // namespace

std::array<StepAtom, 4> step_distribution(double x, double gamma, double rho,
                                          const BanditParams& params) {
  const double pa = params.p_A;
  const double pb = params.p_B;
  return {{
      {x * pa, advance(x, gamma, move_for(0, rho)), AtomLabel::ASuccess},
      {x * (1.0 - pa), advance(x, gamma, move_for(1, rho)), AtomLabel::AFailure},
      {(1.0 - x) * pb, advance(x, gamma, move_for(2, rho)), AtomLabel::BSuccess},
      {(1.0 - x) * (1.0 - pb), advance(x, gamma, move_for(3, rho)), AtomLabel::BFailure},
  }};
}

int select_atom(double x, double u, const BanditParams& params) noexcept {
  if (u < x) {
    return u < x * params.p_A ? 0 : 1;
  }
  return u < x + (1.0 - x) * params.p_B ? 2 : 3;
}

namespace {

inline double clamp_unit(double x, std::uint64_t& clamps) noexcept {
  if (x >= 0.0 && x <= 1.0) [[likely]] return x;
  if (x < 0.0) {
    ++clamps;
    return 0.0;
  }
  if (x > 1.0) {
    ++clamps;
    return 1.0;
  }
  return x;
}

// Same selection and update as select_atom/move_for, written with selects
// instead of a switch: the outcome is unpredictable and mispredicted
// branches dominated the step cost.
inline double sample_step(double x, double u, double gamma, double rho,
                          const BanditParams& params) noexcept {
  const bool arm_a = u < x;
  const double success_edge = arm_a ? x * params.p_A : x + (1.0 - x) * params.p_B;
  const bool success = u < success_edge;
  const double c0 = arm_a ? (success ? 1.0 : 0.0) : (success ? 0.0 : rho);
  const double c1 = success ? -1.0 : -rho;
  return advance(x, gamma, Move{c0, c1});
}

// (gamma_n, rho_n) for n = 1..size, evaluated once and shared by a batch.
class ScheduleTable {
 public:
  static constexpr std::uint64_t kMaxSize = std::uint64_t{1} << 22;

  ScheduleTable(const ScheduleSpec& spec, std::uint64_t size) : steps_(size + 1) {
    for (std::uint64_t n = 1; n <= size; ++n) {
      steps_[n] = schedule_value(spec, n);
    }
  }
  StepPair operator()(std::uint64_t n) const noexcept { return steps_[n]; }

 private:
  std::vector<StepPair> steps_;
};

struct DirectSteps {
  const ScheduleSpec* spec;
  StepPair operator()(std::uint64_t n) const { return schedule_value(*spec, n); }
};

enum class Observable { NormalizedError, Symmetric };

// StepFn(n) -> StepPair; kept as a template so the hot loop has no variant dispatch.
template <class StepFn>
Trajectory run_loop(StepFn step_at, const BanditParams& params, double x0, std::uint64_t n_steps,
                    StreamId stream, const CheckpointGrid& grid, Observable obs) {
  if (!(x0 >= 0.0 && x0 <= 1.0)) {
    throw std::invalid_argument("run_trajectory: x0 must lie in [0, 1]");
  }
  Trajectory traj;
  traj.stream = stream;
  const auto observe = [&](std::uint64_t n, double x) {
    const double rho = step_at(n == 0 ? 1 : n).rho;
    traj.n.push_back(n);
    traj.x.push_back(x);
    traj.y.push_back(obs == Observable::Symmetric ? 1.0 - 2.0 * x : (1.0 - x) / rho);
  };

  observe(0, x0);
  const std::vector<std::uint64_t> checkpoints = grid.points(n_steps);

  Rng rng(stream);
  const BanditParams local = params;
  double x = x0;
  std::uint64_t clamps = 0;
  std::uint64_t n = 1;
  // Run checkpoint to checkpoint so the inner loop carries no bookkeeping.
  for (const std::uint64_t cp : checkpoints) {
    for (; n <= cp; ++n) {
      const StepPair s = step_at(n);
      x = clamp_unit(sample_step(x, rng.uniform(), s.gamma, s.rho, local), clamps);
    }
    observe(cp, x);
  }
  traj.terminal = {n_steps, x};
  traj.clamp_count = clamps;
  return traj;
}

}  // namespace

LrpState lrp_step(const LrpState& state, const ScheduleSpec& spec, const BanditParams& params,
                  Rng& rng) {
  const StepPair s = schedule_value(spec, state.n + 1);
  const int atom = select_atom(state.x, rng.uniform(), params);
  std::uint64_t clamps = 0;
  return {state.n + 1, clamp_unit(advance(state.x, s.gamma, move_for(atom, s.rho)), clamps)};
}

IncrementMoments martingale_increment_moments(double x, double rho, const BanditParams& params) {
  // Increments divided by gamma: the reward part V is nonzero only on the
  // success atoms, the penalty part W only on the failure atoms.
  const auto atoms = step_distribution(x, 1.0, rho, params);
  const double drift = mean_field(x, params, rho);
  IncrementMoments m{0.0, 0.0, 0.0, 0.0, 0.0};
  for (const StepAtom& a : atoms) {
    const double inc = a.next_x - x;
    const double dm = inc - drift;
    m.mean += a.probability * dm;
    m.second_moment += a.probability * dm * dm;
    if (a.label == AtomLabel::ASuccess || a.label == AtomLabel::BSuccess) {
      m.reward_second_moment += a.probability * inc * inc;
    } else {
      m.penalty_second_moment += a.probability * inc * inc;
    }
  }
  m.second_moment_bound = params.p_A * (1.0 - x) + rho * rho * (1.0 - params.p_B);
  return m;
}

std::vector<std::uint64_t> CheckpointGrid::points(std::uint64_t n_steps) const {
  if (!(first >= 1.0 && ratio > 1.0)) {
    throw std::invalid_argument("CheckpointGrid: need first >= 1 and ratio > 1");
  }
  std::vector<std::uint64_t> out;
  for (int k = 0;; ++k) {
    const double v = first * std::pow(ratio, k);
    // Absorb pow() rounding so that e.g. 10^(1/4) grids hit powers of ten.
    const auto n = static_cast<std::uint64_t>(std::ceil(v * (1.0 - 1e-12)));
    if (n > n_steps) {
      break;
    }
    if (out.empty() || out.back() != n) {
      out.push_back(n);
    }
  }
  if (n_steps > 0 && (out.empty() || out.back() != n_steps)) {
    out.push_back(n_steps);
  }
  return out;
}

namespace {

Trajectory run_with_table(const ScheduleSpec& spec, const ScheduleTable* table,
                          const BanditParams& params, double x0, std::uint64_t n_steps,
                          StreamId stream, const CheckpointGrid& grid, Observable obs) {
  if (table != nullptr) {
    return run_loop(*table, params, x0, n_steps, stream, grid, obs);
  }
  if (const auto* c = std::get_if<Coupled>(&spec.variant())) {
    const double g = c->g;
    const double a = c->a_coef;
    return run_loop(
        [g, a](std::uint64_t n) {
          const double rho = a / std::sqrt(static_cast<double>(n));
          return StepPair{g * rho, rho};
        },
        params, x0, n_steps, stream, grid, obs);
  }
  return run_loop(DirectSteps{&spec}, params, x0, n_steps, stream, grid, obs);
}

std::unique_ptr<ScheduleTable> maybe_table(const ScheduleSpec& spec, std::uint64_t n_steps) {
  if (n_steps == 0 || n_steps > ScheduleTable::kMaxSize) {
    return nullptr;
  }
  return std::make_unique<ScheduleTable>(spec, n_steps);
}

ScheduleSpec pi_zero_spec(const Coupled& schedule, const BanditParams& params) {
  if (params.gap() != 0.0) {
    throw std::invalid_argument("run_pi_zero_coupled: requires p_A == p_B");
  }
  return ScheduleSpec{schedule};
}

}  // namespace

Trajectory run_trajectory(const ScheduleSpec& spec, const BanditParams& params, double x0,
                          std::uint64_t n_steps, StreamId stream, const CheckpointGrid& grid) {
  return run_with_table(spec, nullptr, params, x0, n_steps, stream, grid,
                        Observable::NormalizedError);
}

Trajectory run_pi_zero_coupled(const Coupled& schedule, const BanditParams& params, double x0,
                               std::uint64_t n_steps, StreamId stream,
                               const CheckpointGrid& grid) {
  const ScheduleSpec spec = pi_zero_spec(schedule, params);
  return run_with_table(spec, nullptr, params, x0, n_steps, stream, grid, Observable::Symmetric);
}

std::vector<Trajectory> run_batch(const ScheduleSpec& spec, const BanditParams& params, double x0,
                                  std::uint64_t n_steps, std::uint64_t master_seed,
                                  std::uint64_t count, unsigned jobs, const CheckpointGrid& grid) {
  std::vector<Trajectory> out(count);
  const auto table = count > 0 ? maybe_table(spec, n_steps) : nullptr;
  parallel_for_index(count, jobs, [&](std::uint64_t i) {
    out[i] = run_with_table(spec, table.get(), params, x0, n_steps, StreamId{master_seed, i}, grid,
                            Observable::NormalizedError);
  });
  return out;
}

std::vector<Trajectory> run_pi_zero_batch(const Coupled& schedule, const BanditParams& params,
                                          double x0, std::uint64_t n_steps,
                                          std::uint64_t master_seed, std::uint64_t count,
                                          unsigned jobs, const CheckpointGrid& grid) {
  const ScheduleSpec spec = pi_zero_spec(schedule, params);
  std::vector<Trajectory> out(count);
  const auto table = count > 0 ? maybe_table(spec, n_steps) : nullptr;
  parallel_for_index(count, jobs, [&](std::uint64_t i) {
    out[i] = run_with_table(spec, table.get(), params, x0, n_steps, StreamId{master_seed, i}, grid,
                            Observable::Symmetric);
  });
  return out;
}

}  // namespace lrplab
