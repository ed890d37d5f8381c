#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lrplab {

/// Success probabilities of the two arms, 0 < p_B <= p_A < 1.
struct BanditParams {
  double p_A = 0.0;
  double p_B = 0.0;

  BanditParams() = default;
  /// Throws std::invalid_argument unless 0 < p_B <= p_A < 1.
  BanditParams(double p_a, double p_b);

  /// The gap pi = p_A - p_B.
  double gap() const noexcept { return p_A - p_B; }
  /// r_A = (1 - p_A) / p_A, left edge of the limiting support.
  double r_A() const noexcept { return (1.0 - p_A) / p_A; }
  /// r = p_B / p_A.
  double ratio() const noexcept { return p_B / p_A; }
};

// Step/penalty sequences. The reward step is gamma_n, the penalty factor rho_n.

/// gamma_n = C n^-a, rho_n = C' n^-r.
struct PowerLaw {
  double C = 1.0;
  double a = 0.6;
  double C_prime = 1.0;
  double r = 0.3;
};

/// gamma_n = C n^-a, rho_n = rho.
struct ConstantPenalty {
  double C = 1.0;
  double a = 0.6;
  double rho = 0.5;
};

/// rho_n = a_coef / sqrt(n), gamma_n = g rho_n.
struct Coupled {
  double g = 1.0;
  double a_coef = 0.5;
};

struct StepPair {
  double gamma;
  double rho;
};

class ScheduleSpec {
 public:
  using Variant = std::variant<PowerLaw, ConstantPenalty, Coupled>;

  /// Throws std::invalid_argument on non-positive coefficients, rho outside
  /// (0, 1], or gamma_1 > 1 / gamma_1 rho_1 > 1 (the recursion would leave
  /// [0, 1]). All families are non-increasing in n, so n = 1 is the binding case.
  explicit ScheduleSpec(Variant v);
  ScheduleSpec(PowerLaw v) : ScheduleSpec(Variant{v}) {}
  ScheduleSpec(ConstantPenalty v) : ScheduleSpec(Variant{v}) {}
  ScheduleSpec(Coupled v) : ScheduleSpec(Variant{v}) {}

  const Variant& variant() const noexcept { return v_; }
  std::string name() const;

 private:
  Variant v_;
};

/// Exact (gamma_n, rho_n) for n >= 1.
StepPair schedule_value(const ScheduleSpec& spec, std::uint64_t n);

enum class Theorem {
  ConstantPenaltyConvergence,  // X_n -> x*_rho
  Infallibility,               // X_n -> 1
  ConvergenceInProbability,    // (1 - X_n)/rho_n -> (1 - p_A)/pi in probability
  AlmostSureConvergence,       // same limit, almost surely
  WeakConvergence,             // (1 - X_n)/rho_n => stationary law of the jump process
};

std::string to_string(Theorem t);

/// Which hypotheses of the convergence theorems a schedule satisfies.
/// Every flag is decided analytically from the family's exponents.
struct ConditionReport {
  // Standing assumptions on gamma.
  bool gamma_sum_infinite = false;     // sum gamma_n = inf
  bool hoeffding = false;              // sum exp(-theta/gamma_n) < inf for all theta > 0
  // Penalty regime.
  bool rho_to_zero = false;
  bool gamma_over_rho_to_zero = false;
  bool gamma_over_rho_bounded = false;
  bool sum_rho_gamma_infinite = false;
  bool rho_increment_small = false;    // rho_n - rho_{n-1} = o(rho_n gamma_n)
  bool beta_condition = false;         // gamma_n rho_n^b - gamma_{n-1} rho_{n-1}^b = o(gamma_n^2 rho_n^b), b in [0,1]
  bool eta_condition = false;          // sum exp(-C rho_n^(1+eta)/gamma_n) < inf for some eta > 0
  // Weak-limit regime.
  bool gamma_square_increment_small = false;  // gamma_n^2 - gamma_{n-1}^2 = o(gamma_n^2)
  bool coupled_condition = false;             // gamma_n/rho_n = g + o(gamma_n)
  std::optional<double> coupled_g;

  std::vector<Theorem> enabled;

  bool enables(Theorem t) const;
  /// All four displayed hypotheses of the convergence-in-probability theorem.
  bool rho_conditions() const {
    return rho_to_zero && gamma_over_rho_to_zero && sum_rho_gamma_infinite && rho_increment_small;
  }
};

ConditionReport validate_schedule(const ScheduleSpec& spec, const BanditParams& params);

/// Closed-form constants of the rescaled problem for jump size g.
struct ConstantsBundle {
  double pi = 0.0;
  double r = 0.0;
  double r_A = 0.0;
  double g = 0.0;
  double g_star = 0.0;
  double d = 0.0;
  std::optional<double> nu_mean;  // undefined when pi = 0
  std::optional<double> nu_var;
};

/// Throws std::invalid_argument if g <= 0.
ConstantsBundle derived_constants(const BanditParams& params, double g);

/// h(x) = x(1 - x).
inline double reward_field(double x) noexcept { return x * (1.0 - x); }
/// kappa(x) = -(1 - p_A) x^2 + (1 - p_B)(1 - x)^2.
inline double penalty_field(double x, const BanditParams& p) noexcept {
  return -(1.0 - p.p_A) * x * x + (1.0 - p.p_B) * (1.0 - x) * (1.0 - x);
}

/// pi h(x) + rho kappa(x).
double mean_field(double x, const BanditParams& params, double rho);

/// The unique zero of x -> mean_field(x, params, rho) in (0, 1).
double fixed_point_constant_rho(const BanditParams& params, double rho);

}  // namespace lrplab
