// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include "soapmgk/dist_spec.hpp"
#include "soapmgk/distribution.hpp"
#include "soapmgk/error.hpp"
#include "soapmgk/mg1.hpp"
#include "soapmgk/rank.hpp"
#include "soapmgk/sim.hpp"
#include "soapmgk/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

using namespace soapmgk;

namespace {

const std::vector<std::string> kMatrixDists = {"exp(rate=1)", "hyperexp(p=0.9:0.1,mu=2:0.05)",
                                               "boundedpareto(xm=1,alpha=1.5,xmax=100)"};
const std::vector<double> kMatrixRhos = {0.5, 0.8, 0.9};
const std::vector<Policy> kMonotone = {Policy::FCFS, Policy::FB, Policy::MSERPT, Policy::MGittins};
const std::string kBp = "boundedpareto(xm=1,alpha=1.5,xmax=100)";

constexpr std::uint64_t kMatrixJobs = 1250000;  // 1e6 measured after the 20% warm-up

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void note(const std::string& s) { std::fprintf(stderr, "  %s\n", s.c_str()); }

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Rank tables are reused across criteria.
const RankFunction& rank_for(const std::string& spec, Policy p) {
  static std::map<std::pair<std::string, Policy>, RankFunction> cache;
  auto it = cache.find({spec, p});
  if (it == cache.end()) it = cache.emplace(std::make_pair(spec, p), RankFunction::build(p, parse_distribution(spec))).first;
  return it->second;
}

struct SimKey {
  std::string dist;
  Policy policy;
  double rho;
  int k;
  std::uint64_t n;
  auto operator<=>(const SimKey&) const = default;
};

// Simulation results are shared between criteria (1 and 10 use one matrix).
const SimReport& sim(const std::string& spec, Policy p, double rho, int k, std::uint64_t n) {
  static std::map<SimKey, SimReport> cache;
  const SimKey key{spec, p, rho, k, n};
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  SimConfig c;
  c.dist = parse_distribution(spec);
  c.policy = p;
  c.lambda = rho / c.dist.mean();
  c.k = k;
  c.n_jobs = n;
  c.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const SimReport r = simulate(c, p == Policy::SRPT ? nullptr : &rank_for(spec, p));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "    sim %s %s rho=%g k=%d n=%llu: T=%.5g +- %.3g (%.1fs)\n", policy_name(p), spec.c_str(), rho,
               k, static_cast<unsigned long long>(n), r.mean_T, r.ci_half, secs);
  return cache.emplace(key, r).first->second;
}

// 1. Simulated single-server means agree with the analytic formulas.
Outcome criterion1() {
  Outcome o;
  int cells = 0;
  double worst = 0.0;
  for (const std::string& spec : kMatrixDists) {
    const SizeDistribution d = parse_distribution(spec);
    for (Policy p : kMonotone)
      for (double rho : kMatrixRhos) {
        const double t = mg1_metrics(rank_for(spec, p), d, rho / d.mean()).T;
        const SimReport& r = sim(spec, p, rho, 1, kMatrixJobs);
        const double gap = std::abs(r.mean_T - t);
        const bool ok = r.measured >= 1000000 && (gap <= 0.03 * t || gap <= r.ci_half);
        worst = std::max(worst, gap / t);
        ++cells;
        if (!ok) {
          o.pass = false;
          note(fmt("criterion 1 miss: analytic %.6g simulated %.6g ci %.3g", t, r.mean_T, r.ci_half) + " " +
               policy_name(p) + " " + spec + fmt(" rho=%g", rho));
        }
      }
  }
  o.detail = std::to_string(cells) + fmt(" cells, worst relative gap %.4f", worst);
  return o;
}

// 2. A constant rank gives the Pollaczek-Khinchine waiting time.
Outcome criterion2() {
  Outcome o;
  const std::vector<std::string> dists = {"exp(rate=1)",
                                          "uniform(lo=0,hi=1)",
                                          "hyperexp(p=0.9:0.1,mu=2:0.05)",
                                          kBp,
                                          "pareto(xm=1,alpha=2.5)",
                                          "weibull(shape=0.5,scale=1)"};
  const RankFunction constant = RankFunction::from_points({0.0, 1.0}, {1.0, 1.0}, Policy::FCFS);
  double worst = 0.0;
  int cases = 0;
  for (const std::string& spec : dists) {
    const SizeDistribution d = parse_distribution(spec);
    for (double rho : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95}) {
      const double lambda = rho / d.mean();
      const double pk = lambda * d.second_moment() / (2.0 * (1.0 - rho));
      worst = std::max(worst, rel(mg1_metrics(constant, d, lambda).Q, pk));
      ++cases;
    }
  }
  o.pass = worst <= 1e-8;
  o.detail = std::to_string(cases) + fmt(" cases, worst relative error %.3g (tol 1e-8)", worst);
  return o;
}

// 3. Key-quantity decompositions add up to Q, R and S.
Outcome criterion3() {
  Outcome o;
  double wq = 0.0, wr = 0.0, ws = 0.0;
  int finite_s = 0;
  for (const std::string& spec : kMatrixDists) {
    const SizeDistribution d = parse_distribution(spec);
    for (Policy p : {Policy::MSERPT, Policy::MGittins})
      for (double rho : kMatrixRhos) {
        const double lambda = rho / d.mean();
        const Mg1Metrics m = mg1_metrics(rank_for(spec, p), d, lambda);
        const KeyQuantities k = key_quantities(rank_for(spec, p), d, lambda);
        wq = std::max(wq, rel(k.Qa + k.Qb, m.Q));
        wr = std::max(wr, rel(k.Rb + k.Rc, m.R));
        if (std::isfinite(m.S)) {
          ws = std::max(ws, rel(k.Sb + k.Sc, m.S));
          ++finite_s;
        }
      }
  }
  o.pass = wq <= 1e-6 && wr <= 1e-6 && ws <= 1e-6;
  o.detail = fmt("worst relative Q %.3g R %.3g S %.3g", wq, wr, ws) + " (" + std::to_string(finite_s) +
             " finite S cases, tol 1e-6)";
  return o;
}

// 4. Simulated k-server means never exceed the analytic bound.
Outcome criterion4() {
  Outcome o;
  constexpr std::uint64_t kJobs = 500000;
  int cells = 0;
  double tightest = 0.0;
  for (const std::string& spec : {kBp, std::string("uniform(lo=0,hi=1)")}) {
    const SizeDistribution d = parse_distribution(spec);
    for (Policy p : {Policy::MSERPT, Policy::MGittins})
      for (int k : {2, 4, 10})
        for (double rho : {0.5, 0.8, 0.95}) {
          const double bound = mgk_bound(rank_for(spec, p), d, rho / d.mean(), k);
          const SimReport& r = sim(spec, p, rho, k, kJobs);
          tightest = std::max(tightest, (r.mean_T - r.ci_half) / bound);
          ++cells;
          if (r.mean_T - r.ci_half > bound) {
            o.pass = false;
            note(fmt("criterion 4 miss: T %.6g ci %.3g bound %.6g", r.mean_T, r.ci_half, bound) + " " +
                 policy_name(p) + " " + spec + fmt(" k=%g rho=%g", k, rho));
          }
        }
  }
  o.detail = std::to_string(cells) + fmt(" cells, largest (T - ci)/bound %.3f", tightest);
  return o;
}

// 5. Relative-work coupling between one and k servers.
Outcome criterion5() {
  Outcome o;
  const SizeDistribution d = parse_distribution(kBp);
  const RankFunction& r = rank_for(kBp, Policy::MSERPT);
  double tightest = 0.0;
  std::uint64_t min_events = ~0ull;
  for (int k : {2, 4})
    for (double x : {2.0, 10.0, 50.0}) {
      SimConfig c;
      c.dist = d;
      c.policy = Policy::MSERPT;
      c.lambda = 0.8 / d.mean();
      c.k = k;
      c.n_jobs = 100000;
      CoupledTrace t = simulate_coupled(c, x, &r);
      while (t.events < 100000) {
        c.n_jobs *= 2;
        t = simulate_coupled(c, x, &r);
      }
      const double bound = (k - 1) * r.cutoffs(x).z;
      min_events = std::min(min_events, t.events);
      tightest = std::max(tightest, t.max_delta / bound);
      if (t.max_delta > bound + 1e-9 || t.violations > 0) {
        o.pass = false;
        note(fmt("criterion 5 miss: k=%g x=%g max delta %.6g bound %.6g", k, x, t.max_delta, bound));
      }
    }
  o.detail = fmt("6 runs, min events %.0f, largest max_delta/bound %.3f", static_cast<double>(min_events), tightest);
  return o;
}

// Criteria 6 and 7 share one sweep: Gittins on one server against the
// monotone policies on four, with the job count grown until each run's
// CI half-width is within 2% of its mean.
struct Estimate {
  double mean = 0.0;
  double rel_ci = 0.0;
};

Estimate precise(Policy p, double rho, int k) {
  constexpr double kTarget = 0.02;
  constexpr std::uint64_t kCap = 120000000;
  std::uint64_t n = 1000000;
  for (;;) {
    const SimReport& r = sim(kBp, p, rho, k, n);
    const double rc = r.ci_half / r.mean_T;
    if (rc <= kTarget || n >= kCap) return {r.mean_T, rc};
    const double grow = std::pow(rc / (0.95 * kTarget), 2.0) * 1.1;
    n = std::min<std::uint64_t>(kCap, static_cast<std::uint64_t>(static_cast<double>(n) * std::max(grow, 1.5)));
  }
}

struct Ratio {
  double rho, value, rel_ci, worst_run_ci;
};

std::vector<Ratio> ratio_sweep(Policy p) {
  std::vector<Ratio> out;
  for (double rho : {0.8, 0.9, 0.95, 0.98}) {
    const Estimate base = precise(Policy::Gittins, rho, 1);
    const Estimate multi = precise(p, rho, 4);
    out.push_back({rho, multi.mean / base.mean, std::hypot(base.rel_ci, multi.rel_ci),
                   std::max(base.rel_ci, multi.rel_ci)});
  }
  return out;
}

std::string describe_ratios(const std::vector<Ratio>& rs) {
  std::string s;
  for (const Ratio& r : rs) s += fmt(" rho=%g: %.4f (+-%.1f%%)", r.rho, r.value, 100.0 * r.rel_ci);
  return s;
}

Outcome criterion6() {
  Outcome o;
  const std::vector<Ratio> rs = ratio_sweep(Policy::MGittins);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (rs[i].worst_run_ci > 0.02) o.pass = false;
    if (i > 0 && rs[i].value > rs[i - 1].value) o.pass = false;
  }
  if (rs.back().value > 1.2) o.pass = false;
  o.detail = "M-Gittins k=4 / Gittins k=1:" + describe_ratios(rs);
  return o;
}

Outcome criterion7() {
  Outcome o;
  const std::vector<Ratio> rs = ratio_sweep(Policy::MSERPT);
  for (const Ratio& r : rs)
    if (r.value * (1.0 - r.rel_ci) > 2.0) o.pass = false;
  o.detail = "M-SERPT k=4 / Gittins k=1:" + describe_ratios(rs);
  return o;
}

// 8. Heavy-traffic scaling diagnostics on the analytic M-SERPT mean.
Outcome criterion8() {
  Outcome o;
  const std::vector<double> rhos = {0.9, 0.99, 0.999};
  auto band = [&](const std::string& spec, const std::function<double(const SizeDistribution&, const RankFunction&,
                                                                       double, double)>& stat) {
    const SizeDistribution d = parse_distribution(spec);
    const RankFunction& r = rank_for(spec, Policy::MSERPT);
    double lo = INFINITY, hi = 0.0;
    for (double rho : rhos) {
      const double t = mg1_metrics(r, d, rho / d.mean()).T;
      const double v = stat(d, r, rho, t);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi / lo;
  };
  const double a = band("exp(rate=1)", [](const SizeDistribution&, const RankFunction&, double rho, double t) {
    return (1.0 - rho) * t;
  });
  const double b = band("pareto(xm=1,alpha=1.5)",
                        [](const SizeDistribution& d, const RankFunction&, double rho, double t) {
                          const double scale = std::log(1.0 / (1.0 - rho));
                          if (rel(heavy_traffic_scale(d, rho, TrafficBranch::IV), scale) > 1e-12)
                            throw std::runtime_error("IV scale mismatch");
                          return t / scale;
                        });
  const double c = band("pareto(xm=1,alpha=2.5)",
                        [](const SizeDistribution& d, const RankFunction& r, double rho, double t) {
                          const double v = t * (1.0 - rho) * r(d.excess_tail_inverse(1.0 - rho));
                          if (rel(t / heavy_traffic_scale(d, rho, TrafficBranch::FV), v) > 1e-6)
                            throw std::runtime_error("FV scale mismatch");
                          return v;
                        });
  o.pass = a <= 1.1 && b <= 3.0 && c <= 3.0;
  o.detail = fmt("max/min: (a) %.4f (limit 1.1) (b) %.4f (limit 3) (c) %.4f (limit 3)", a, b, c);
  return o;
}

// 9. Rank invariants from the invariant suite.
Outcome criterion9() {
  Outcome o;
  VerifyMatrix m = default_verify_matrix();
  m.simulate = false;
  const std::set<std::string> required = {"gittins_le_serpt",   "gittins_le_inverse_hazard", "envelope_idempotent",
                                          "cutoff_order",       "cutoff_level_serpt",        "cutoff_level_gittins",
                                          "eta_old_cutoff_dominance", "cutoff_growth_band"};
  std::set<std::string> seen;
  int rows = 0, failed = 0;
  for (const InvariantResult& r : run_invariants(m)) {
    if (r.module != "rank") continue;
    ++rows;
    seen.insert(r.name);
    if (!r.passed) {
      ++failed;
      note("criterion 9 miss: " + r.name + " " + r.subject + " " + r.detail);
    }
  }
  for (const std::string& name : required)
    if (!seen.count(name)) {
      o.pass = false;
      note("criterion 9: missing invariant " + name);
    }
  if (failed) o.pass = false;
  o.detail = std::to_string(rows - failed) + "/" + std::to_string(rows) + " rank invariants passed";
  return o;
}

// 10. Gittins is best on one server among the non-clairvoyant policies.
Outcome criterion10() {
  Outcome o;
  int comparisons = 0;
  double worst = -INFINITY;
  for (const std::string& spec : kMatrixDists)
    for (double rho : kMatrixRhos) {
      const SimReport& g = sim(spec, Policy::Gittins, rho, 1, kMatrixJobs);
      for (Policy p : {Policy::FCFS, Policy::FB, Policy::SERPT, Policy::MSERPT, Policy::MGittins}) {
        const SimReport& r = sim(spec, p, rho, 1, kMatrixJobs);
        const double slack = g.ci_half + r.ci_half;
        worst = std::max(worst, (g.mean_T - r.mean_T) / slack);
        ++comparisons;
        if (g.mean_T > r.mean_T + slack) {
          o.pass = false;
          note(fmt("criterion 10 miss: Gittins %.6g vs %.6g (slack %.3g)", g.mean_T, r.mean_T, slack) + " " +
               policy_name(p) + " " + spec + fmt(" rho=%g", rho));
        }
      }
    }
  o.detail = std::to_string(comparisons) + fmt(" comparisons, largest (T_gittins - T_other)/slack %.3f", worst);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8,
                                                          criterion9, criterion10};
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
  int failed = 0;
  for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
    if (!chosen.empty() && !chosen.count(i)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d: %s  %s [%.1fs]\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed ? 1 : 0;
}
