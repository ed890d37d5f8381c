#pragma once

#include <variant>
#include <vector>

#include "lrplab/model_params.hpp"

namespace lrplab {

/// G(u) = -p_A u + p_B (e^(g u) - 1)/g, the right side of the psi equation.
double psi_rhs(double u, const BanditParams& params, double g) noexcept;

enum class PsiBranch {
  Laplace,    // psi(0) = -p
  ExpMoment,  // psi(0) = +p
};

struct PsiOptions {
  /// Stop once |psi| <= tol p.
  double tol = 1e-10;
  /// Absolute local error target of the integrator.
  double abs_tol = 1e-10;
  /// Hard horizon; a bounded solution still above tol p here is returned as is.
  double t_max = 1e4;
};

struct PsiSolution {
  double psi0 = 0.0;
  std::vector<double> t;
  std::vector<double> psi;
  /// int_0^T psi over the integrated range.
  double integral = 0.0;
  double horizon = 0.0;
  /// int_T^inf psi lies in [tail_lo, tail_hi]; tail_estimate is the
  /// midpoint.
  double tail_lo = 0.0;
  double tail_hi = 0.0;
  double tail_estimate = 0.0;
  /// Local error budget of the integration, summed over steps.
  double error_bound = 0.0;
};

struct BlowUp {
  double time;
  double psi;
};

using PsiResult = std::variant<PsiSolution, BlowUp>;

/// Solves psi' = G(psi) from +-p with an embedded Dormand-Prince 5(4) pair,
/// carrying int psi along. Requires p_A > p_B. The ExpMoment branch returns
/// BlowUp once psi > 10 p*_g or the step size collapses below 1e-14.
PsiResult solve_psi(double p, PsiBranch branch, const BanditParams& params, double g,
                    const PsiOptions& options = {});

struct LaplaceValue {
  double value;
  double lo;
  double hi;
};

/// int e^(-p y) nu(dy) = exp((1 - p_A) int_0^inf psi_p). Requires p >= 0 and p_A > p_B.
LaplaceValue laplace_nu(double p, const BanditParams& params, double g, double tol = 1e-10);

struct ThetaRoot {
  double y;
  double theta;
  double residual;
};

/// The positive root of (e^theta - 1)/theta = y. Throws std::domain_error if y <= 1.
ThetaRoot theta_root(double y);

/// p*_g = theta(p_A/p_B)/g, the positive root of psi_rhs. Throws
/// std::domain_error if p_A == p_B.
double critical_exponent(const BanditParams& params, double g);

enum class BoundaryClass { Diverges, FinitePositive, Zero };

const char* to_string(BoundaryClass c);

/// Behaviour of the stationary density at r_A from d = g*/g:
/// Zero if d > 1, FinitePositive if d = 1 (relative 1e-12), Diverges if d < 1.
BoundaryClass boundary_classification(const BanditParams& params, double g);

/// Normalizing constant of (1 - y^2)^(2 r_A/g - 1) on (-1, 1), in closed form.
double pi_zero_normalizer(double p_A, double g);

/// Density of the equal-arms limit at each grid point; zero outside (-1, 1).
std::vector<double> pi_zero_density(double p_A, double g, const std::vector<double>& grid);

}  // namespace lrplab
