#include <doctest.h>

#include <cmath>
#include <random>

#include "lrplab/model_params.hpp"
#include "oracles.hpp"

using namespace lrplab;

namespace {
const BanditParams kLeft(0.4, 1.0 / 3.0);
const BanditParams kCenter(0.4, 4.0 / 15.0);
const BanditParams kRight(0.4, 1.0 / 6.0);
}  // namespace

TEST_CASE("params validation") {
  CHECK_THROWS_AS(BanditParams(0.3, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(BanditParams(1.0, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(BanditParams(0.4, 0.0), std::invalid_argument);
  CHECK_NOTHROW(BanditParams(0.4, 0.4));
  CHECK(kLeft.gap() == doctest::Approx(1.0 / 15.0));
  CHECK(kLeft.r_A() == doctest::Approx(1.5));
}

TEST_CASE("schedule values") {
  const ScheduleSpec pl{PowerLaw{1.0, 0.6, 1.0, 0.3}};
  const auto v1 = schedule_value(pl, 1);
  CHECK(v1.gamma == 1.0);
  CHECK(v1.rho == 1.0);
  const auto v = schedule_value(pl, 1000);
  CHECK(v.gamma == doctest::Approx(std::pow(1000.0, -0.6)).epsilon(1e-15));
  CHECK(v.rho == doctest::Approx(std::pow(1000.0, -0.3)).epsilon(1e-15));
  const auto c = schedule_value(ScheduleSpec{Coupled{1.0, 0.5}}, 4);
  CHECK(c.gamma == 0.25);
  CHECK(c.rho == 0.25);
  const auto k = schedule_value(ScheduleSpec{ConstantPenalty{0.5, 0.6, 0.3}}, 10);
  CHECK(k.rho == 0.3);
  CHECK(k.gamma == doctest::Approx(0.5 * std::pow(10.0, -0.6)));
}

TEST_CASE("schedule construction rejects unstable first steps") {
  CHECK_THROWS_AS(ScheduleSpec(PowerLaw{1.5, 0.6, 1.0, 0.3}), std::invalid_argument);
  CHECK_THROWS_AS(ScheduleSpec(ConstantPenalty{1.0, 0.6, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(ScheduleSpec(Coupled{3.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ScheduleSpec(PowerLaw{1.0, -0.1, 1.0, 0.3}), std::invalid_argument);
  CHECK_NOTHROW(ScheduleSpec(Coupled{3.0, 0.3}));
}

TEST_CASE("gamma is non-increasing") {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 20; ++trial) {
    const ScheduleSpec s{PowerLaw{u(eng), u(eng), u(eng), u(eng)}};
    double prev = schedule_value(s, 1).gamma;
    for (std::uint64_t n = 2; n < 100000; n = n * 3 / 2 + 1) {
      const double g = schedule_value(s, n).gamma;
      CHECK(g <= prev);
      prev = g;
    }
  }
}

TEST_CASE("validate_schedule examples") {
  const auto r = validate_schedule(ScheduleSpec{PowerLaw{1.0, 0.6, 1.0, 0.3}}, kLeft);
  CHECK(r.rho_conditions());
  CHECK(r.enables(Theorem::ConvergenceInProbability));
  CHECK(r.enables(Theorem::AlmostSureConvergence));
  CHECK(r.enables(Theorem::Infallibility));
  CHECK_FALSE(r.enables(Theorem::WeakConvergence));

  const auto c = validate_schedule(ScheduleSpec{Coupled{1.0, 0.5}}, kLeft);
  CHECK(c.coupled_condition);
  REQUIRE(c.coupled_g.has_value());
  CHECK(*c.coupled_g == 1.0);
  CHECK(c.enables(Theorem::WeakConvergence));

  const auto bad = validate_schedule(ScheduleSpec{PowerLaw{1.0, 0.3, 1.0, 0.6}}, kLeft);
  CHECK_FALSE(bad.rho_conditions());
  CHECK_FALSE(bad.enables(Theorem::ConvergenceInProbability));

  const auto k = validate_schedule(ScheduleSpec{ConstantPenalty{1.0, 0.6, 0.5}}, kLeft);
  CHECK(k.enables(Theorem::ConstantPenaltyConvergence));
  CHECK_FALSE(k.rho_to_zero);
}

TEST_CASE("rho conditions iff 0 < r < a and a + r < 1") {
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 500; ++trial) {
    const double a = u(eng), r = u(eng);
    const auto rep = validate_schedule(ScheduleSpec{PowerLaw{1.0, a, 1.0, r}}, kLeft);
    CHECK(rep.rho_conditions() == (r < a && a + r < 1.0));
    CHECK(rep.sum_rho_gamma_infinite == (a + r <= 1.0));
    CHECK(rep.hoeffding);
  }
}

TEST_CASE("true flags agree with the sequences on a log grid") {
  std::mt19937_64 eng(12);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 20; ++trial) {
    const double a = u(eng), r = u(eng);
    const ScheduleSpec s{PowerLaw{1.0, a, 1.0, r}};
    const auto rep = validate_schedule(s, kLeft);
    if (!rep.rho_increment_small || !rep.gamma_over_rho_to_zero) continue;
    ++checked;
    double prev_inc = INFINITY, prev_ratio = INFINITY;
    for (double e = 1.0; e <= 6.0; e += 0.25) {
      const auto n = static_cast<std::uint64_t>(std::pow(10.0, e));
      const auto cur = schedule_value(s, n);
      const auto before = schedule_value(s, n - 1);
      const double inc = std::abs(cur.rho - before.rho) / (cur.rho * cur.gamma);
      const double ratio = cur.gamma / cur.rho;
      CHECK(inc < prev_inc);
      CHECK(ratio < prev_ratio);
      prev_inc = inc;
      prev_ratio = ratio;
    }
  }
  CHECK(checked == 20);
}

TEST_CASE("derived constants") {
  const auto c = derived_constants(kLeft, 1.0);
  CHECK(c.g_star == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(c.nu_mean.value() == doctest::Approx(9.0).epsilon(1e-13));
  CHECK(c.nu_var.value() == doctest::Approx(22.5).epsilon(1e-13));
  CHECK(derived_constants(kCenter, 1.0).g_star == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(derived_constants(kRight, 1.0).g_star == doctest::Approx(0.625).epsilon(1e-14));
  const auto z = derived_constants(BanditParams(0.4, 0.4), 1.0);
  CHECK_FALSE(z.nu_mean.has_value());
  CHECK_FALSE(z.nu_var.has_value());
  CHECK_THROWS_AS(derived_constants(kLeft, 0.0), std::invalid_argument);
}

TEST_CASE("d g = g* and nu_mean > r_A on random parameters") {
  std::mt19937_64 eng(13);
  std::uniform_real_distribution<double> u(0.01, 0.99), ug(0.01, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    double a = u(eng), b = u(eng);
    if (b > a) std::swap(a, b);
    if (a == b) continue;
    const BanditParams p(a, b);
    const double g = ug(eng);
    const auto c = derived_constants(p, g);
    CHECK(std::abs(c.d * g - c.g_star) <= 1e-14 * c.g_star);
    CHECK(*c.nu_mean > c.r_A);
  }
}

TEST_CASE("mean field endpoints") {
  const double rho = 0.1;
  CHECK(mean_field(0.0, kLeft, rho) == doctest::Approx(rho * (1 - kLeft.p_B)));
  CHECK(mean_field(1.0, kLeft, rho) == doctest::Approx(-rho * (1 - kLeft.p_A)));
  const double kappa = -(0.6) * 0.25 + (2.0 / 3.0) * 0.25;
  CHECK(mean_field(0.5, kLeft, rho) == doctest::Approx(0.25 / 15.0 + rho * kappa));
}

TEST_CASE("fixed point examples") {
  for (double rho : {0.01, 0.5, 1.0}) {
    CHECK(fixed_point_constant_rho(BanditParams(0.4, 0.4), rho) == 0.5);
  }
  // With rho = 1 the quadratic terms cancel and the root is
  // (1 - p_B)/((1 - p_A) + (1 - p_B)); (1 - p_A)/(...) = 1/3 is not a root.
  const BanditParams wide(0.6, 0.2);
  CHECK(fixed_point_constant_rho(wide, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(std::abs(mean_field(1.0 / 3.0, wide, 1.0)) > 0.1);
  const BanditParams p(0.6, 0.5);
  const double ref = oracle::bisect(
      [&](double x) { return 0.1 * x * (1 - x) + 0.2 * (-(0.4) * x * x + 0.5 * (1 - x) * (1 - x)); },
      0.0, 1.0);
  CHECK(fixed_point_constant_rho(p, 0.2) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("fixed point property on random parameters") {
  std::mt19937_64 eng(14);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 1000; ++trial) {
    double a = u(eng), b = u(eng);
    if (b > a) std::swap(a, b);
    if (trial % 10 == 0) b = a * (1 - 1e-9);  // tiny gap
    const BanditParams p(a, b);
    const double rho = u(eng);
    const double x = fixed_point_constant_rho(p, rho);
    CHECK(std::abs(mean_field(x, p, rho)) <= 1e-12);
    if (p.gap() > 0) CHECK(x > 0.5);
  }
}
