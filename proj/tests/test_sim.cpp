#include "soapmgk/distribution.hpp"
#include "soapmgk/error.hpp"
#include "soapmgk/mg1.hpp"
#include "soapmgk/rank.hpp"
#include "soapmgk/sim.hpp"

#include <doctest.h>

#include <cmath>

using namespace soapmgk;

namespace {

const SizeDistribution kBp = SizeDistribution::bounded_pareto(1.0, 1.5, 100.0);

SimConfig config(const SizeDistribution& d, Policy p, double rho, int k, std::uint64_t n) {
  SimConfig c;
  c.dist = d;
  c.policy = p;
  c.lambda = rho / d.mean();
  c.k = k;
  c.n_jobs = n;
  return c;
}

}  // namespace

TEST_SUITE("simkq") {
  TEST_CASE("a lone job runs at speed 1/k") {
    for (Policy p : {Policy::FCFS, Policy::FB, Policy::MGittins}) {
      SimConfig c = config(SizeDistribution::exponential(1.0), p, 1e-4, 3, 50000);
      const SimReport r = simulate(c);
      CHECK(std::abs(r.mean_T - 3.0) <= r.ci_half + 0.02);
    }
  }

  TEST_CASE("FCFS M/M/1 mean response time") {
    const SimReport r = simulate(config(SizeDistribution::exponential(1.0), Policy::FCFS, 0.5, 1, 400000));
    CHECK(std::abs(r.mean_T - 2.0) <= r.ci_half);
  }

  TEST_CASE("M-SERPT single server matches the analytic mean") {
    const SimConfig c = config(kBp, Policy::MSERPT, 0.8, 1, 1250000);
    const RankFunction rank = RankFunction::build(Policy::MSERPT, kBp);
    const double t = mg1_metrics(rank, kBp, c.lambda).T;
    const SimReport r = simulate(c, &rank);
    CHECK((std::abs(r.mean_T - t) <= 0.03 * t || std::abs(r.mean_T - t) <= r.ci_half));
  }

  TEST_CASE("runs are reproducible and conserve work") {
    const SimConfig c = config(kBp, Policy::MGittins, 0.8, 2, 30000);
    const SimReport a = simulate(c), b = simulate(c);
    CHECK(a.mean_T == b.mean_T);
    CHECK(a.events == b.events);
    CHECK(a.work_served == doctest::Approx(a.work_completed + a.work_in_progress).epsilon(1e-9));
    CHECK(a.batch_means.size() == 20);
    CHECK(a.bins.size() == 10);
    SimConfig other = c;
    other.seed = 2;
    CHECK(simulate(other).mean_T != a.mean_T);
  }

  TEST_CASE("servers run the lowest ranks at speed at most 1/k") {
    const SimConfig c = config(kBp, Policy::MSERPT, 0.8, 2, 15000);
    const RankFunction rank = RankFunction::build(Policy::MSERPT, kBp);
    bool ok = true;
    simulate(c, &rank, [&](const DecisionView& v) {
      double total = 0.0;
      for (const DecisionView::Served& s : v.served) {
        ok &= s.rate <= 1.0 / v.k + 1e-12;
        total += s.rate;
        if (v.best_waiting) ok &= s.rank <= v.best_waiting->rank + 1e-9;
      }
      ok &= total <= 1.0 + 1e-12;
      if (v.best_waiting) ok &= total >= 1.0 - 1e-12;
    });
    CHECK(ok);
  }

  TEST_CASE("nonmonotone and SRPT policies run") {
    for (Policy p : {Policy::SERPT, Policy::Gittins, Policy::SRPT}) {
      const SimReport r = simulate(config(kBp, p, 0.7, 2, 20000));
      CHECK(std::isfinite(r.mean_T));
      CHECK(r.measured == 16000);
    }
  }

  TEST_CASE("coupled relevant work stays within the bound") {
    const RankFunction rank = RankFunction::build(Policy::MSERPT, kBp);
    const CoupledTrace one = simulate_coupled(config(kBp, Policy::MSERPT, 0.8, 1, 20000), 10.0, &rank);
    CHECK(one.max_delta == 0.0);
    for (int k : {2, 4}) {
      const CoupledTrace t = simulate_coupled(config(kBp, Policy::MSERPT, 0.8, k, 60000), 10.0, &rank);
      CHECK(t.events >= 100000);
      CHECK(t.violations == 0);
      CHECK(t.max_delta <= (k - 1) * rank.cutoffs(10.0).z + 1e-9);
      CHECK(t.bound == doctest::Approx((k - 1) * rank.cutoffs(10.0).z));
    }
  }

  TEST_CASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(simulate(config(kBp, Policy::FCFS, 1.0, 1, 20000)), Error);
    CHECK_THROWS_AS(simulate(config(kBp, Policy::FCFS, 0.5, 0, 20000)), Error);
    CHECK_THROWS_AS(simulate(config(kBp, Policy::FCFS, 0.5, 1, 1000)), Error);
  }
}
