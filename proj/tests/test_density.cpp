#include <doctest.h>

#include <cmath>
#include <random>

#include "lrplab/density.hpp"
#include "oracles.hpp"

using namespace lrplab;

namespace {
const BanditParams kLeft(0.4, 1.0 / 3.0);
const BanditParams kCenter(0.4, 4.0 / 15.0);
const BanditParams kRight(0.4, 1.0 / 6.0);

// Smooth bump on (c - w, c + w).
struct Bump {
  double c, w;
  double f(double y) const {
    const double z = (y - c) / w;
    return std::abs(z) < 1 ? std::pow(1 - z * z, 4) : 0.0;
  }
  double df(double y) const {
    const double z = (y - c) / w;
    return std::abs(z) < 1 ? -8 * z * std::pow(1 - z * z, 3) / w : 0.0;
  }
};
}  // namespace

TEST_CASE("moments match the closed forms") {
  for (const BanditParams& p : {kLeft, kCenter, kRight}) {
    const PiecewiseDensity d(p, 1.0, 60);
    const auto c = derived_constants(p, 1.0);
    CHECK(d.mean() == doctest::Approx(*c.nu_mean).epsilon(1e-6));
    CHECK(d.variance() == doctest::Approx(*c.nu_var).epsilon(1e-5));
    CHECK(d.cdf(d.range_end()) + d.tail_mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("first interval is a multiple of F") {
  const PiecewiseDensity d(kLeft, 1.0);
  const double ra = d.r_A(), r = kLeft.ratio(), dd = d.exponent_d();
  for (double y = ra + 0.01; y < ra + 1.0; y += 0.07) {
    const double F = std::exp(r * (y - ra)) * std::pow(y - ra, dd - 1);
    CHECK(d.phi(y) / F == doctest::Approx(d.lambda0()).epsilon(1e-12));
    CHECK(d.ratio(y) == doctest::Approx(d.lambda0()).epsilon(1e-12));
  }
}

TEST_CASE("boundary behaviour at r_A") {
  const PiecewiseDensity left(kLeft, 1.0), center(kCenter, 1.0), right(kRight, 1.0);
  CHECK(left.boundary() == BoundaryClass::Zero);
  CHECK(center.boundary() == BoundaryClass::FinitePositive);
  CHECK(right.boundary() == BoundaryClass::Diverges);
  const double eps = 1e-8;
  CHECK(left.phi(left.r_A() + eps) < 1e-3);
  CHECK(center.phi(center.r_A() + eps) == doctest::Approx(center.lambda0()).epsilon(1e-6));
  CHECK(right.phi(right.r_A() + eps) > 100.0);
}

TEST_CASE("support, positivity and monotone ratio") {
  for (const BanditParams& p : {kLeft, kCenter, kRight}) {
    const PiecewiseDensity d(p, 1.0, 30);
    CHECK(d.phi(d.r_A()) == 0.0);
    CHECK(d.phi(d.r_A() - 0.5) == 0.0);
    CHECK(d.phi(0.0) == 0.0);
    CHECK(d.cdf(d.r_A()) == 0.0);
    CHECK(d.mass(0.0, d.r_A()) == 0.0);
    double prev = INFINITY;
    for (int k = 0; k < d.intervals(); ++k) {
      for (double q : d.ratios(k)) {
        CHECK(q <= prev * (1 + 1e-12));
        prev = q;
      }
      for (double v : d.values(k)) CHECK(v > 0.0);
    }
    CHECK_THROWS_AS(d.ratio(d.range_end() + 1.0), std::out_of_range);
    CHECK_THROWS_AS(d.values(d.intervals()), std::out_of_range);
    // The fitted tail keeps phi positive over the whole requested range.
    for (double y = d.r_A() + 0.01; y < d.r_A() + d.n_max() * d.g(); y += 0.1) CHECK(d.phi(y) > 0.0);
  }
}

TEST_CASE("march length follows the rounding budget") {
  const PiecewiseDensity left(kLeft, 1.0, 60), center(kCenter, 1.0, 60), right(kRight, 1.0, 60);
  CHECK(left.intervals() > center.intervals());
  CHECK(center.intervals() > right.intervals());
  CHECK(right.intervals() >= 10);
  CHECK(PiecewiseDensity(kLeft, 1.0, 12).intervals() == 12);
  CHECK(right.tail_rate() > 0.0);
  CHECK(right.tail_mass() < 1e-5);
}

TEST_CASE("cdf is consistent with quadrature of phi") {
  const PiecewiseDensity d(kCenter, 1.0, 30);
  const double a = d.r_A() + 0.3, b = d.r_A() + 2.7;
  const double q = oracle::simpson([&](double y) { return d.phi(y); }, a, b, 1e-12);
  CHECK(d.mass(a, b) == doctest::Approx(q).epsilon(1e-7));
}

TEST_CASE("random parameters give a positive normalized density") {
  std::mt19937_64 eng(51);
  std::uniform_real_distribution<double> u(0.05, 0.95), ug(0.2, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    double a = u(eng), b = u(eng);
    if (b > a) std::swap(a, b);
    if (a - b < 0.05) continue;
    const BanditParams p(a, b);
    const double g = ug(eng);
    const PiecewiseDensity d(p, g, 40);
    const auto c = derived_constants(p, g);
    CHECK(d.cdf(d.range_end()) + d.tail_mass() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.mean() == doctest::Approx(*c.nu_mean).epsilon(0.01));
    CHECK(d.variance() == doctest::Approx(*c.nu_var).epsilon(0.05));
    double prev = INFINITY;
    for (int k = 0; k < d.intervals(); ++k) {
      for (double v : d.values(k)) CHECK(v > 0.0);
      for (double q : d.ratios(k)) {
        CHECK(q <= prev * (1 + 1e-7));
        prev = q;
      }
    }
  }
}

TEST_CASE("stationary generator residual") {
  const PiecewiseDensity d(kLeft, 1.0, 30);
  const double ra = d.r_A();
  const auto zero = stationary_generator_residual([](double) { return 0.0; },
                                                  [](double) { return 0.0; }, ra, ra + 3, d);
  CHECK(zero.residual == 0.0);
  const Bump b{ra + 1.0, 0.5};
  const auto r = stationary_generator_residual([&](double y) { return b.f(y); },
                                               [&](double y) { return b.df(y); }, ra + 0.5,
                                               ra + 1.5, d);
  CHECK(std::abs(r.residual) <= 1e-3 * r.scale);
  CHECK_THROWS_AS(stationary_generator_residual([&](double y) { return b.f(y); },
                                                [&](double y) { return b.df(y); }, ra,
                                                d.range_end() + 1.0, d),
                  std::invalid_argument);
}

TEST_CASE("generator residual shrinks under refinement") {
  const Bump b{kRight.r_A() + 1.2, 0.9};
  double prev = INFINITY;
  for (int ppi : {16, 32, 64, 128}) {
    const PiecewiseDensity d(kRight, 1.0, 30, ppi);
    const auto r = stationary_generator_residual([&](double y) { return b.f(y); },
                                                 [&](double y) { return b.df(y); },
                                                 d.r_A() + 0.3, d.r_A() + 2.1, d);
    const double rel = std::abs(r.residual) / r.scale;
    CHECK(rel < prev);
    prev = rel;
  }
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(PiecewiseDensity(BanditParams(0.4, 0.4), 1.0), std::domain_error);
  CHECK_THROWS_AS(PiecewiseDensity(kLeft, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseDensity(kLeft, 1.0, 20, 8), std::invalid_argument);
}
