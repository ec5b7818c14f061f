#include "soapmgk/distribution.hpp"
#include "soapmgk/error.hpp"
#include "soapmgk/mg1.hpp"
#include "soapmgk/numerics.hpp"
#include "soapmgk/rank.hpp"

#include <doctest.h>

#include <cmath>

using namespace soapmgk;

namespace {

const SizeDistribution kExp = SizeDistribution::exponential(1.0);
const SizeDistribution kUni = SizeDistribution::uniform(0.0, 1.0);
const SizeDistribution kBp = SizeDistribution::bounded_pareto(1.0, 1.5, 100.0);

RankFunction constant_rank() { return RankFunction::from_points({0.0, 1.0}, {1.0, 1.0}, Policy::FCFS); }

double pk_waiting(const SizeDistribution& d, double lambda) {
  return lambda * d.second_moment() / (2.0 * (1.0 - lambda * d.mean()));
}

// Per-size response time from the cutoff form, integrated independently of
// the library's own integration layout.
double response_oracle(const RankFunction& r, const SizeDistribution& d, double lambda) {
  const LoadProfile lp(d, lambda);
  auto t = [&](double x) {
    const AgeCutoffs c = r.cutoffs(x);
    return lp.tau(c.z) / (lp.coload(c.y) * lp.coload(c.z)) + x / lp.coload(c.y);
  };
  double sum = 0.0;
  const auto grid = numerics::build_log_grid(d.support_inf(), d.support_sup(), 400);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    sum += numerics::integrate_adaptive([&](double x) { return t(x) * d.density(x); }, grid[i], grid[i + 1]).value;
  return sum;
}

}  // namespace

TEST_SUITE("mg1") {
  TEST_CASE("load profile") {
    const LoadProfile lp(kExp, 0.5);
    CHECK(lp.coload(0.0) == 1.0);
    CHECK(lp.tau(0.0) == 0.0);
    CHECK(lp.coload(kInfinity) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lp.tau(kInfinity) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(LoadProfile(kExp, 1.0), Error);
  }

  TEST_CASE("constant rank reduces to M/G/1 FCFS") {
    const Mg1Metrics m = mg1_metrics(constant_rank(), kExp, 0.5);
    CHECK(m.Q == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.R == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.T == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(m.S == kInfinity);
    for (double rho : {0.1, 0.5, 0.95}) {
      const double lambda = rho / kBp.mean();
      CHECK(mg1_metrics(constant_rank(), kBp, lambda).Q == doctest::Approx(pk_waiting(kBp, lambda)).epsilon(1e-8));
    }
  }

  TEST_CASE("inflated residence for a constant envelope on a bounded law") {
    const Mg1Metrics m = mg1_metrics(RankFunction::build(Policy::MGittins, kUni), kUni, 1.0);
    CHECK(m.S == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("key quantities") {
    const KeyQuantities k = key_quantities(constant_rank(), kExp, 0.5);
    CHECK(k.Qa == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(k.Qb == doctest::Approx(0.5).epsilon(1e-10));
    const double lambda = 0.8 / kBp.mean();
    for (Policy p : {Policy::MSERPT, Policy::MGittins, Policy::FB}) {
      const RankFunction r = RankFunction::build(p, kBp);
      const Mg1Metrics m = mg1_metrics(r, kBp, lambda);
      const KeyQuantities q = key_quantities(r, kBp, lambda);
      CHECK(q.Sb == q.Rb);
      CHECK(q.Qa + q.Qb == doctest::Approx(m.Q).epsilon(1e-6));
      CHECK(q.Rb + q.Rc == doctest::Approx(m.R).epsilon(1e-6));
      CHECK(q.Sb + q.Sc == doctest::Approx(m.S).epsilon(1e-6));
    }
  }

  TEST_CASE("metrics match an independent cutoff-form integration") {
    const double lambda = 0.8 / kBp.mean();
    for (Policy p : {Policy::FB, Policy::MSERPT, Policy::MGittins}) {
      CAPTURE(policy_name(p));
      const RankFunction r = RankFunction::build(p, kBp);
      CHECK(mg1_metrics(r, kBp, lambda).T == doctest::Approx(response_oracle(r, kBp, lambda)).epsilon(1e-6));
    }
  }

  TEST_CASE("tail form agrees unless the fault is injected") {
    const double lambda = 0.9 / kBp.mean();
    const RankFunction r = RankFunction::build(Policy::MSERPT, kBp);
    const Mg1Metrics a = mg1_metrics(r, kBp, lambda);
    const Mg1Metrics b = mg1_metrics_alt(r, kBp, lambda);
    CHECK(b.Q == doctest::Approx(a.Q).epsilon(1e-6));
    CHECK(b.R == doctest::Approx(a.R).epsilon(1e-6));
    CHECK(b.S == doctest::Approx(a.S).epsilon(1e-6));
    CHECK(std::abs(mg1_metrics_alt(r, kBp, lambda, true).Q - a.Q) > 1e-3 * a.Q);
  }

  TEST_CASE("light traffic") {
    const Mg1Metrics m = mg1_metrics(RankFunction::build(Policy::MGittins, kBp), kBp, 1e-6);
    CHECK(m.Q < 1e-4);
    CHECK(std::abs(m.R - kBp.mean()) < 1e-4);
  }

  TEST_CASE("multiserver bound") {
    const double lambda = 0.8 / kBp.mean();
    const RankFunction r = RankFunction::build(Policy::MGittins, kBp);
    const Mg1Metrics m = mg1_metrics(r, kBp, lambda);
    CHECK(mgk_bound(r, kBp, lambda, 1) == doctest::Approx(m.T).epsilon(1e-12));
    CHECK(mgk_bound(r, kBp, lambda, 4) == doctest::Approx(m.Q + 4.0 * m.R + 3.0 * m.S).epsilon(1e-12));
    for (double x : {2.0, 20.0}) {
      const double z = r.cutoffs(x).z;
      CHECK(mgk_bound_at(r, kBp, 1e-6, 3, x) == doctest::Approx(3.0 * x + 2.0 * z).epsilon(1e-4));
    }
    CHECK(mgk_bound(constant_rank(), kExp, 0.5, 2) == kInfinity);
  }

  TEST_CASE("heavy traffic scale") {
    CHECK(heavy_traffic_scale(kExp, 0.9, TrafficBranch::FV) == doctest::Approx(10.0).epsilon(1e-9));
    const SizeDistribution p15 = SizeDistribution::pareto(1.0, 1.5);
    CHECK(heavy_traffic_scale(p15, 1.0 - std::exp(-1.0), TrafficBranch::IV) == doctest::Approx(1.0).epsilon(1e-12));
    const SizeDistribution p25 = SizeDistribution::pareto(1.0, 2.5);
    const double q = std::pow(0.01 / 0.4, -1.0 / 1.5);  // closed-form excess tail inverse
    CHECK(heavy_traffic_scale(p25, 0.99, TrafficBranch::FV) == doctest::Approx(1.0 / (0.01 * q / 1.5)).epsilon(1e-6));
    CHECK_THROWS_AS(heavy_traffic_scale(kExp, 0.9, TrafficBranch::IV), Error);
  }

  TEST_CASE("nonmonotone ranks and atoms are rejected") {
    CHECK_THROWS_AS(mg1_metrics(RankFunction::build(Policy::SERPT, kBp), kBp, 0.1), Error);
    const SizeDistribution atoms = SizeDistribution::point_mass_mixture({1.0, 2.0}, {0.5, 0.5});
    CHECK_THROWS_AS(mg1_metrics(constant_rank(), atoms, 0.1), Error);
  }
}
