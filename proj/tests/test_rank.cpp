#include "soapmgk/distribution.hpp"
#include "soapmgk/error.hpp"
#include "soapmgk/numerics.hpp"
#include "soapmgk/rank.hpp"
#include "soapmgk/sim.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace soapmgk;

namespace {

const SizeDistribution kExp = SizeDistribution::exponential(1.0);
const SizeDistribution kUni = SizeDistribution::uniform(0.0, 1.0);
const SizeDistribution kPar = SizeDistribution::pareto(1.0, 2.0);
const SizeDistribution kBp = SizeDistribution::bounded_pareto(1.0, 1.5, 100.0);
const SizeDistribution kHyp = SizeDistribution::hyperexponential({0.9, 0.1}, {2.0, 0.05});

// Brute-force Gittins rank: eta minimized over a dense log grid of b.
double gittins_oracle(const SizeDistribution& d, double a) {
  double best = std::min(serpt_rank(d, a), 1.0 / d.hazard(a));
  const double hi = std::isfinite(d.support_sup()) ? d.support_sup() : d.truncation_horizon();
  for (double b : numerics::build_log_grid(a + 1e-6 * (1.0 + a), hi, 4000)) best = std::min(best, eta(d, a, b));
  return best;
}

}  // namespace

TEST_SUITE("rank") {
  TEST_CASE("eta") {
    CHECK(eta(kExp, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eta(kUni, 0.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    for (const SizeDistribution* d : {&kExp, &kPar, &kHyp})
      for (double a : {1.5, 2.0, 7.0}) CHECK(eta(*d, a, a) == doctest::Approx(1.0 / d->hazard(a)).epsilon(1e-12));
  }

  TEST_CASE("serpt rank") {
    for (double a : {0.0, 1.0, 9.0}) CHECK(serpt_rank(kExp, a) == doctest::Approx(1.0).epsilon(1e-10));
    // Oracle for Pareto: quadrature of the conditional remaining size.
    const double q = numerics::integrate_adaptive([](double t) { return 1.0 / (t * t); }, 3.0, kInfinity).value;
    CHECK(serpt_rank(kPar, 3.0) == doctest::Approx(q / kPar.tail(3.0)).epsilon(1e-9));
    CHECK(serpt_rank(kPar, 3.0) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(serpt_rank(kUni, 0.4) == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("gittins rank") {
    for (double a : {0.0, 2.0}) CHECK(gittins_rank(kExp, a) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(gittins_rank(kUni, 0.4) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(gittins_rank(kPar, 4.0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(gittins_rank(kPar, 4.0) == doctest::Approx(gittins_oracle(kPar, 4.0)).epsilon(1e-6));
    for (double a : {0.1, 1.0, 5.0, 30.0}) {
      CAPTURE(a);
      const double g = gittins_rank(kHyp, a);
      CHECK(g <= gittins_oracle(kHyp, a) * (1.0 + 1e-9));
      CHECK(g >= gittins_oracle(kHyp, a) * (1.0 - 1e-6));
    }
  }

  TEST_CASE("envelope") {
    const RankFunction inc = RankFunction::build(Policy::SERPT, kPar);
    const RankFunction env = monotone_envelope(inc);
    for (double a : {2.0, 10.0, 100.0}) CHECK(std::abs(env(a) - inc(a)) <= 1e-9 * inc(a));
    const RankFunction flat = RankFunction::build(Policy::MGittins, kUni);
    for (double a : {0.0, 0.3, 0.9}) CHECK(flat(a) == doctest::Approx(0.5).epsilon(1e-12));
    const RankFunction small = monotone_envelope(RankFunction::from_points({0.0, 1.0, 2.0}, {2.0, 1.0, 3.0}));
    CHECK(small(0.0) == 2.0);
    CHECK(small(1.0) == 2.0);
    CHECK(small(2.0) == 3.0);
    CHECK(small.monotone());
  }

  TEST_CASE("envelope is idempotent") {
    for (const SizeDistribution* d : {&kBp, &kHyp}) {
      const RankFunction once = RankFunction::build(Policy::MGittins, *d);
      const RankFunction twice = monotone_envelope(once);
      for (double a : once.ages()) CHECK(twice(a) == doctest::Approx(once(a)).epsilon(1e-12));
    }
  }

  TEST_CASE("age cutoffs") {
    const RankFunction strict = RankFunction::from_points({0.0, 10.0}, {0.0, 10.0}, Policy::FB);
    const AgeCutoffs c = strict.cutoffs(4.0);
    CHECK(c.y == doctest::Approx(4.0));
    CHECK(c.z == doctest::Approx(4.0));
    const RankFunction constant = RankFunction::build(Policy::MGittins, kExp);
    for (double x : {0.5, 3.0}) {
      CHECK(constant.cutoffs(x).y == 0.0);
      CHECK(constant.cutoffs(x).z == kInfinity);
    }
    const RankFunction step = RankFunction::from_points({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 1.0, 2.0});
    const AgeCutoffs f = step.cutoffs(1.5);
    CHECK(f.y == doctest::Approx(1.0));
    CHECK(f.z == doctest::Approx(2.0));
    CHECK_THROWS_AS(RankFunction::build(Policy::SERPT, kBp).cutoffs(2.0), Error);
  }

  TEST_CASE("cutoffs bracket the size and sit at its rank level") {
    for (const SizeDistribution* d : {&kBp, &kHyp}) {
      const RankFunction r = RankFunction::build(Policy::MSERPT, *d);
      for (double x : numerics::build_log_grid(0.05, 90.0, 40)) {
        const AgeCutoffs c = r.cutoffs(x);
        CHECK(c.y <= x);
        CHECK(x <= c.z);
        if (c.y > 0.0) CHECK(r(c.y) <= r(x) * (1.0 + 1e-12));
      }
    }
  }

  TEST_CASE("peak age") {
    CHECK(peak_age(kUni) == 0.0);
    CHECK(peak_age(kExp) == 0.0);
    const double a = peak_age(kBp);
    CHECK(a > 0.0);
    double best = 0.0, arg = 0.0;
    for (double b : numerics::build_log_grid(1e-3, 100.0, 20000))
      if (const double v = serpt_rank(kBp, b); v > best) best = v, arg = b;
    CHECK(a == doctest::Approx(arg).epsilon(1e-2));
    CHECK_THROWS_AS(peak_age(kPar), Error);
  }

  TEST_CASE("cutoff growth diagnostic") {
    const RankFunction r = RankFunction::build(Policy::MSERPT, kPar);
    const CutoffGrowthReport rep = cutoff_growth_diagnostic(r, kPar, numerics::build_log_grid(10.0, 1000.0, 25));
    CHECK(rep.mode == CutoffGrowthReport::Mode::OR);
    CHECK(rep.min_upper >= 1.0);
    CHECK(rep.max_upper <= 10.0);
    const CutoffGrowthReport e = cutoff_growth_diagnostic(RankFunction::build(Policy::MSERPT, kExp), kExp, {1.0, 2.0});
    CHECK(e.mode == CutoffGrowthReport::Mode::NotApplicable);
    CHECK(e.rows[0].z == kInfinity);
    const RankFunction g = RankFunction::build(Policy::MGittins, kBp);
    const CutoffGrowthReport b = cutoff_growth_diagnostic(g, kBp, numerics::build_log_grid(1.0, peak_age(kBp) * 0.9, 8));
    for (const CutoffGrowthRow& row : b.rows) CHECK(std::isfinite(row.upper));
  }

  TEST_CASE("next crossing time") {
    const RankFunction fb = RankFunction::build(Policy::FB, kExp);
    REQUIRE(next_crossing_time(fb, 2.0, 5.0).has_value());
    CHECK(*next_crossing_time(fb, 2.0, 5.0) == doctest::Approx(3.0).epsilon(1e-12));
    const RankFunction flat = RankFunction::from_points({0.0, 5.0}, {1.0, 1.0});
    CHECK_FALSE(next_crossing_time(flat, 1.0, 2.0).has_value());
    // Oracle: fine-step walk along the curve.
    const RankFunction two = RankFunction::from_points({0.0, 1.0, 4.0}, {0.0, 0.5, 3.5});
    double walk = 0.0;
    while (two(walk) < 2.0) walk += 1e-6;
    REQUIRE(next_crossing_time(two, 0.0, 2.0).has_value());
    CHECK(*next_crossing_time(two, 0.0, 2.0) == doctest::Approx(walk).epsilon(1e-5));
  }

  TEST_CASE("gittins never exceeds serpt or the inverse hazard") {
    for (const SizeDistribution* d : {&kBp, &kHyp, &kUni})
      for (double a : numerics::build_log_grid(1e-2, 0.99 * (std::isfinite(d->support_sup()) ? d->support_sup() : 80.0), 30)) {
        const double g = gittins_rank(*d, a);
        CHECK(g <= serpt_rank(*d, a) + 1e-9);
        CHECK(g <= 1.0 / d->hazard_or_limit(a) + 1e-9);
      }
  }
}
