#include "lrplab/model_params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrplab {

BanditParams::BanditParams(double p_a, double p_b) : p_A(p_a), p_B(p_b) {
  if (!(p_b > 0.0 && p_b <= p_a && p_a < 1.0)) {
    throw std::invalid_argument("BanditParams: need 0 < p_B <= p_A < 1, got p_A=" +
                                std::to_string(p_a) + " p_B=" + std::to_string(p_b));
  }
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) {
    throw std::invalid_argument(std::string("ScheduleSpec: ") + what);
  }
}

}  // namespace

ScheduleSpec::ScheduleSpec(Variant v) : v_(v) {
  std::visit(Overloaded{
                 [](const PowerLaw& s) {
                   require(s.C > 0 && s.a > 0 && s.C_prime > 0 && s.r > 0,
                           "PowerLaw needs C, a, C', r > 0");
                 },
                 [](const ConstantPenalty& s) {
                   require(s.C > 0 && s.a > 0, "ConstantPenalty needs C, a > 0");
                   require(s.rho > 0 && s.rho <= 1, "ConstantPenalty needs rho in (0, 1]");
                 },
                 [](const Coupled& s) {
                   require(s.g > 0 && s.a_coef > 0, "Coupled needs g, a_coef > 0");
                 },
             },
             v_);
  const StepPair first = schedule_value(*this, 1);
  require(first.gamma <= 1.0, "gamma_1 must be <= 1");
  require(first.gamma * first.rho <= 1.0, "gamma_1 rho_1 must be <= 1");
}

std::string ScheduleSpec::name() const {
  return std::visit(Overloaded{
                        [](const PowerLaw&) { return std::string("PowerLaw"); },
                        [](const ConstantPenalty&) { return std::string("ConstantPenalty"); },
                        [](const Coupled&) { return std::string("Coupled"); },
                    },
                    v_);
}

StepPair schedule_value(const ScheduleSpec& spec, std::uint64_t n) {
  const double x = static_cast<double>(n);
  return std::visit(Overloaded{
                        [x](const PowerLaw& s) {
                          return StepPair{s.C * std::pow(x, -s.a), s.C_prime * std::pow(x, -s.r)};
                        },
                        [x](const ConstantPenalty& s) {
                          return StepPair{s.C * std::pow(x, -s.a), s.rho};
                        },
                        [x](const Coupled& s) {
                          const double rho = s.a_coef / std::sqrt(x);
                          return StepPair{s.g * rho, rho};
                        },
                    },
                    spec.variant());
}

std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::ConstantPenaltyConvergence:
      return "constant-penalty-convergence";
    case Theorem::Infallibility:
      return "infallibility";
    case Theorem::ConvergenceInProbability:
      return "convergence-in-probability";
    case Theorem::AlmostSureConvergence:
      return "almost-sure-convergence";
    case Theorem::WeakConvergence:
      return "weak-convergence";
  }
  return "unknown";
}

bool ConditionReport::enables(Theorem t) const {
  return std::find(enabled.begin(), enabled.end(), t) != enabled.end();
}

namespace {

// Power-law gamma_n = C n^-a: sum diverges iff a <= 1; the Hoeffding series
// sum exp(-theta n^a / C) converges for every a > 0.
void fill_gamma_flags(double a, ConditionReport& rep) {
  rep.gamma_sum_infinite = a <= 1.0;
  rep.hoeffding = a > 0.0;
  // (gamma_n^2 - gamma_{n-1}^2)/gamma_n^2 ~ 2a/n.
  rep.gamma_square_increment_small = true;
}

}  // namespace

ConditionReport validate_schedule(const ScheduleSpec& spec, const BanditParams& params) {
  ConditionReport rep;
  std::visit(
      Overloaded{
          [&](const PowerLaw& s) {
            fill_gamma_flags(s.a, rep);
            rep.rho_to_zero = s.r > 0.0;
            rep.gamma_over_rho_to_zero = s.a > s.r;
            rep.gamma_over_rho_bounded = s.a >= s.r;
            rep.sum_rho_gamma_infinite = s.a + s.r <= 1.0;
            // (rho_{n-1} - rho_n)/(rho_n gamma_n) ~ (r/C) n^(a-1).
            rep.rho_increment_small = s.a < 1.0;
            // Relative increment of gamma_n rho_n^b is ~ (a + b r)/n, against gamma_n ~ n^-a.
            rep.beta_condition = s.a < 1.0;
            // rho_n^(1+eta)/gamma_n ~ n^(a - r(1+eta)) grows for small eta iff a > r.
            rep.eta_condition = s.a > s.r;
            if (s.a == s.r) {
              rep.coupled_condition = true;
              rep.coupled_g = s.C / s.C_prime;
            }
          },
          [&](const ConstantPenalty& s) {
            fill_gamma_flags(s.a, rep);
            rep.rho_to_zero = false;
            rep.gamma_over_rho_to_zero = true;
            rep.gamma_over_rho_bounded = true;
            rep.sum_rho_gamma_infinite = s.a <= 1.0;
            rep.rho_increment_small = true;
            rep.beta_condition = s.a < 1.0;
            rep.eta_condition = true;
          },
          [&](const Coupled& s) {
            fill_gamma_flags(0.5, rep);
            rep.rho_to_zero = true;
            rep.gamma_over_rho_to_zero = false;
            rep.gamma_over_rho_bounded = true;
            rep.sum_rho_gamma_infinite = true;  // sum g a^2 / n
            // (rho_{n-1} - rho_n)/(rho_n gamma_n) ~ 1/(2 g a sqrt(n)).
            rep.rho_increment_small = true;
            rep.beta_condition = true;
            rep.eta_condition = false;  // rho_n^(1+eta)/gamma_n -> 0
            rep.coupled_condition = true;
            rep.coupled_g = s.g;
          },
      },
      spec.variant());

  const bool standing = rep.gamma_sum_infinite && rep.hoeffding;
  const bool better_arm = params.gap() > 0.0;
  if (standing && std::holds_alternative<ConstantPenalty>(spec.variant())) {
    rep.enabled.push_back(Theorem::ConstantPenaltyConvergence);
  }
  if (standing && better_arm && rep.rho_to_zero && rep.gamma_over_rho_bounded &&
      rep.sum_rho_gamma_infinite) {
    rep.enabled.push_back(Theorem::Infallibility);
  }
  if (standing && better_arm && rep.rho_conditions()) {
    rep.enabled.push_back(Theorem::ConvergenceInProbability);
    if (rep.beta_condition && rep.eta_condition) {
      rep.enabled.push_back(Theorem::AlmostSureConvergence);
    }
  }
  if (standing && better_arm && rep.coupled_condition && rep.gamma_square_increment_small) {
    rep.enabled.push_back(Theorem::WeakConvergence);
  }
  return rep;
}

ConstantsBundle derived_constants(const BanditParams& params, double g) {
  if (!(g > 0.0)) {
    throw std::invalid_argument("derived_constants: g must be positive");
  }
  ConstantsBundle c;
  c.pi = params.gap();
  c.r = params.ratio();
  c.r_A = params.r_A();
  c.g = g;
  c.g_star = params.p_B * (1.0 - params.p_A) / (params.p_A * params.p_A);
  c.d = c.r * c.r_A / g;
  if (c.pi > 0.0) {
    c.nu_mean = (1.0 - params.p_A) / c.pi;
    c.nu_var = g * params.p_B * (1.0 - params.p_A) / (2.0 * c.pi * c.pi);
  }
  return c;
}

double mean_field(double x, const BanditParams& params, double rho) {
  return params.gap() * reward_field(x) + rho * penalty_field(x, params);
}

double fixed_point_constant_rho(const BanditParams& params, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("fixed_point_constant_rho: rho must lie in (0, 1]");
  }
  const double pi = params.gap();
  const double qa = 1.0 - params.p_A;
  const double qb = 1.0 - params.p_B;
  double x;
  if (std::abs(pi) < 1e-14 || std::abs(rho - 1.0) < 1e-14) {
    // mean_field is linear in x here.
    x = qb / (qa + qb);
  } else {
    // Rationalized larger root of -pi(1-rho) x^2 + (pi - 2 rho qb) x + rho qb.
    const double disc = pi * pi + 4.0 * rho * rho * qa * qb;
    x = 2.0 * rho * qb / (2.0 * rho * qb - pi + std::sqrt(disc));
  }
  if (std::abs(mean_field(x, params, rho)) > 1e-12) {
    // mean_field is positive at 0, negative at 1, with a single sign change.
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mean_field(mid, params, rho) > 0.0 ? lo : hi) = mid;
    }
    x = 0.5 * (lo + hi);
  }
  return x;
}

}  // namespace lrplab
