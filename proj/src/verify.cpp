#include "soapmgk/verify.hpp"

#include "soapmgk/dist_spec.hpp"
#include "soapmgk/error.hpp"
#include "soapmgk/mg1.hpp"
#include "soapmgk/numerics.hpp"
#include "soapmgk/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace soapmgk {

namespace {

double rel_gap(double a, double b) {
  if (a == b) return 0.0;
  if (std::isinf(a) || std::isinf(b)) return kInfinity;
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

class Suite {
public:
  // Records one invariant: passed iff worst <= tol.
  void add(const std::string& module, const std::string& name, const std::string& subject,
           double worst, double tol) {
    InvariantResult r{module, name, subject, worst <= tol, worst, ""};
    if (!r.passed) r.detail = "worst " + fmt(worst) + " exceeds " + fmt(tol);
    out.push_back(std::move(r));
  }

  // Runs body and turns a library error into a failed row.
  void guard(const std::string& module, const std::string& name, const std::string& subject,
             const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      out.push_back({module, name, subject, false, kInfinity, e.what()});
    }
  }

  std::vector<InvariantResult> out;
};

std::vector<double> probe_ages(const SizeDistribution& d, std::size_t n) {
  const double lo = std::max(d.support_inf(), 1e-3 * d.mean());
  double hi = d.bounded() ? d.support_sup() : d.tail_inverse(1e-9);
  hi = std::max(hi, lo * 2.0);
  auto g = numerics::build_log_grid(lo, hi, n);
  if (d.bounded()) g.pop_back();  // ranks are defined strictly inside the support
  g.insert(g.begin(), 0.0);
  return g;
}

void check_distribution(Suite& s, const SizeDistribution& d, const std::string& name) {
  s.guard("distlib", "tail_nonincreasing", name, [&] {
    const auto g = numerics::build_log_grid(1e-6 * d.mean(), d.truncation_horizon(), 1000);
    double worst = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i) worst = std::max(worst, d.tail(g[i]) - d.tail(g[i - 1]));
    s.add("distlib", "tail_nonincreasing", name, worst, 0.0);
  });
  s.guard("distlib", "m1_matches_quadrature", name, [&] {
    double worst = 0.0;
    const auto bps = d.breakpoints();
    numerics::QuadratureOptions opt;
    opt.abs_tol = 1e-14;
    opt.rel_tol = 1e-12;
    for (double f : {0.5, 1.0, 2.0, 10.0}) {
      const double a = std::min(f * d.mean(), d.truncation_horizon());
      const double q =
          numerics::integrate_pieces([&](double t) { return d.tail(t); }, 0.0, a, bps, opt).value;
      worst = std::max(worst, rel_gap(d.truncated_moments(a).m1, q));
    }
    s.add("distlib", "m1_matches_quadrature", name, worst, 1e-9);
  });
  s.guard("distlib", "excess_inverse_roundtrip", name, [&] {
    double worst = 0.0;
    for (double q : {0.9, 0.5, 0.1, 0.01, 1e-4})
      worst = std::max(worst, rel_gap(d.excess_tail(d.excess_tail_inverse(q)), q));
    s.add("distlib", "excess_inverse_roundtrip", name, worst, 1e-9);
  });
  if (std::holds_alternative<family::Exponential>(d.params())) {
    s.guard("distlib", "exponential_memoryless", name, [&] {
      double worst = 0.0;
      for (double x : numerics::build_log_grid(1e-3, 30.0 * d.mean(), 50))
        worst = std::max(worst, rel_gap(d.excess_tail(x), d.tail(x)));
      s.add("distlib", "exponential_memoryless", name, worst, 1e-9);
    });
  }
}

struct Ranks {
  RankFunction mserpt;
  RankFunction mgittins;
};

void check_ranks(Suite& s, const SizeDistribution& d, const std::string& name, const Ranks& r) {
  const auto ages = probe_ages(d, 60);
  s.guard("rank", "gittins_le_serpt", name, [&] {
    double worst = 0.0;
    for (double a : ages) {
      const double sr = serpt_rank(d, a);
      worst = std::max(worst, (gittins_rank(d, a) - sr) / std::max(1.0, sr));
    }
    s.add("rank", "gittins_le_serpt", name, worst, 1e-9);
  });
  s.guard("rank", "gittins_le_inverse_hazard", name, [&] {
    double worst = 0.0;
    for (double a : ages) {
      const double h = d.hazard_or_limit(a);
      if (!(h > 0.0)) continue;
      const double inv = 1.0 / h;
      worst = std::max(worst, (gittins_rank(d, a) - inv) / std::max(1.0, inv));
    }
    s.add("rank", "gittins_le_inverse_hazard", name, worst, 1e-9);
  });
  s.guard("rank", "mgittins_le_mserpt", name, [&] {
    double worst = 0.0;
    for (double a : ages) worst = std::max(worst, (r.mgittins(a) - r.mserpt(a)) / std::max(1.0, r.mserpt(a)));
    s.add("rank", "mgittins_le_mserpt", name, worst, 1e-9);
  });
  s.guard("rank", "envelope_idempotent", name, [&] {
    double worst = 0.0;
    for (const RankFunction* f : {&r.mserpt, &r.mgittins}) {
      const RankFunction again = monotone_envelope(*f);
      for (double a : ages) worst = std::max(worst, rel_gap(again(a), (*f)(a)));
    }
    s.add("rank", "envelope_idempotent", name, worst, 1e-12);
  });

  const auto sizes = probe_ages(d, 40);
  s.guard("rank", "cutoff_order", name, [&] {
    double worst = 0.0;
    for (const RankFunction* f : {&r.mserpt, &r.mgittins})
      for (double x : sizes) {
        const AgeCutoffs c = f->cutoffs(x);
        worst = std::max({worst, c.y - x, x - c.z, -c.y});
      }
    s.add("rank", "cutoff_order", name, worst, 0.0);
  });
  // At the cutoffs the base rank equals the envelope value at x.
  auto level_sets = [&](const char* label, const RankFunction& env,
                        double (*base)(const SizeDistribution&, double)) {
    s.guard("rank", label, name, [&] {
      double worst = 0.0;
      for (double x : sizes) {
        const AgeCutoffs c = env.cutoffs(x);
        const double rx = env(x);
        if (c.y > 0.0) worst = std::max(worst, rel_gap(base(d, c.y), rx));
        if (c.z < d.support_sup()) worst = std::max(worst, rel_gap(base(d, c.z), rx));
      }
      s.add("rank", label, name, worst, 1e-6);
    });
  };
  level_sets("cutoff_level_serpt", r.mserpt, serpt_rank);
  level_sets("cutoff_level_gittins", r.mgittins, gittins_rank);
  s.guard("rank", "eta_old_cutoff_dominance", name, [&] {
    double worst = 0.0;
    for (double x : sizes) {
      const AgeCutoffs c = r.mgittins.cutoffs(x);
      if (!(c.z > c.y) || c.z == kInfinity) continue;
      const double outer = eta(d, c.y, c.z);
      for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double a = c.y + f * (c.z - c.y);
        worst = std::max(worst, (eta(d, a, c.z) - outer) / std::max(1.0, outer));
      }
    }
    s.add("rank", "eta_old_cutoff_dominance", name, worst, 1e-9);
  });
}

void check_fixed_rank_laws(Suite& s) {
  const std::string name = "pareto(xm=1,alpha=2)";
  s.guard("rank", "cutoff_growth_band", name, [&] {
    const SizeDistribution d = SizeDistribution::pareto(1.0, 2.0);
    const RankFunction r = RankFunction::build(Policy::MSERPT, d);
    const auto rep = cutoff_growth_diagnostic(r, d, numerics::build_log_grid(10.0, 1000.0, 50));
    const double worst = std::max(1.0 - rep.min_upper, rep.max_upper - 10.0);
    s.add("rank", "cutoff_growth_band", name, std::max(worst, 0.0), 1e-9);
  });
  s.guard("rank", "eta_lower_bound", name, [&] {
    const SizeDistribution d = SizeDistribution::pareto(1.0, 2.0);
    auto ratio = [&](double a, double b) { return eta(d, a, b) / (a * (1.0 - a / b)); };
    auto min_ratio = [&](std::size_t n) {
      double m = kInfinity;
      for (double a : numerics::build_log_grid(10.0, 1000.0, n))
        for (double f : numerics::build_log_grid(1.01, 100.0, n)) m = std::min(m, ratio(a, a * f));
      return m;
    };
    const double c = 0.5 * min_ratio(8);
    s.add("rank", "eta_lower_bound", name, std::max(0.0, c - min_ratio(40)), 0.0);
  });
}

void check_mg1(Suite& s, const SizeDistribution& d, const std::string& name, const VerifyMatrix& m,
               const std::map<Policy, RankFunction>& ranks) {
  for (const auto& [p, r] : ranks) {
    const std::string pn = policy_name(p);
    for (double rho : m.rhos) {
      const std::string subj = pn + " " + name + " rho=" + fmt(rho);
      const double lambda = rho / d.mean();
      s.guard("mg1", "metrics", subj, [&] {
        const Mg1Metrics mm = mg1_metrics(r, d, lambda);
        const double worst =
            std::max({mm.T == mm.Q + mm.R ? 0.0 : 1.0, -mm.Q, -mm.R, mm.R - mm.S});
        s.add("mg1", "metrics_consistent", subj, worst, 0.0);

        const KeyQuantities kq = key_quantities(r, d, lambda);
        s.add("mg1", "key_q_identity", subj, rel_gap(kq.Qa + kq.Qb, mm.Q), 1e-6);
        s.add("mg1", "key_r_identity", subj, rel_gap(kq.Rb + kq.Rc, mm.R), 1e-6);
        if (std::isfinite(mm.S)) s.add("mg1", "key_s_identity", subj, rel_gap(kq.Sb + kq.Sc, mm.S), 1e-6);
        s.add("mg1", "sb_equals_rb", subj, kq.Sb == kq.Rb ? 0.0 : 1.0, 0.0);

        const Mg1Metrics alt = mg1_metrics_alt(r, d, lambda, m.fault);
        double w = std::max(rel_gap(alt.Q, mm.Q), rel_gap(alt.R, mm.R));
        if (std::isfinite(mm.S)) w = std::max(w, rel_gap(alt.S, mm.S));
        s.add("mg1", "tail_form_agreement", subj, w, 1e-6);
        s.add("mg1", "single_server_bound", subj, rel_gap(mgk_bound(mm, 1), mm.T), 1e-12);
      });
    }
    s.guard("mg1", "waiting_monotone_in_load", pn + " " + name, [&] {
      double prev = 0.0;
      double worst = 0.0;
      for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double q = mg1_metrics(r, d, rho / d.mean()).Q;
        worst = std::max(worst, (prev - q) / std::max(1.0, q));
        prev = q;
      }
      s.add("mg1", "waiting_monotone_in_load", pn + " " + name, worst, 1e-9);
    });
  }

  s.guard("mg1", "constant_rank_waiting", name, [&] {
    const RankFunction fcfs = RankFunction::build(Policy::FCFS, d);
    double worst = 0.0;
    for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9, 0.95}) {
      const double lambda = rho / d.mean();
      const double pk = lambda * d.second_moment() / (2.0 * (1.0 - rho));
      worst = std::max(worst, rel_gap(mg1_metrics(fcfs, d, lambda).Q, pk));
    }
    s.add("mg1", "constant_rank_waiting", name, worst, 1e-8);
  });

  if (std::holds_alternative<family::Exponential>(d.params())) {
    s.guard("mg1", "exponential_gittins_is_fcfs", name, [&] {
      const RankFunction fcfs = RankFunction::build(Policy::FCFS, d);
      const RankFunction mg = RankFunction::build(Policy::MGittins, d);
      double worst = 0.0;
      for (double rho : m.rhos) {
        const Mg1Metrics a = mg1_metrics(mg, d, rho / d.mean());
        const Mg1Metrics b = mg1_metrics(fcfs, d, rho / d.mean());
        worst = std::max({worst, rel_gap(a.Q, b.Q), rel_gap(a.R, b.R)});
      }
      s.add("mg1", "exponential_gittins_is_fcfs", name, worst, 1e-9);
    });
    s.guard("mg1", "finite_variance_scale_constant", name, [&] {
      const double base = heavy_traffic_scale(d, 0.9, TrafficBranch::FV) * 0.1;
      double worst = 0.0;
      for (double rho : {0.99, 0.999})
        worst = std::max(worst, rel_gap(heavy_traffic_scale(d, rho, TrafficBranch::FV) * (1.0 - rho), base));
      s.add("mg1", "finite_variance_scale_constant", name, worst, 1e-9);
    });
  }
}

void check_sim(Suite& s, const SizeDistribution& d, const std::string& name, const VerifyMatrix& m,
               Policy p, const RankFunction* rank) {
  const double rho = m.rhos[m.rhos.size() / 2];
  const std::string subj = std::string(policy_name(p)) + " " + name + " rho=" + fmt(rho);
  SimConfig cfg;
  cfg.dist = d;
  cfg.lambda = rho / d.mean();
  cfg.policy = p;
  cfg.n_jobs = m.sim_jobs;
  cfg.seed = m.seed;

  s.guard("simkq", "run", subj, [&] {
    cfg.k = 1;
    const SimReport a = simulate(cfg, rank);
    const SimReport b = simulate(cfg, rank);
    s.add("simkq", "deterministic", subj,
          a.mean_T == b.mean_T && a.batch_means == b.batch_means && a.events == b.events ? 0.0 : 1.0,
          0.0);
    const double balance = a.work_served - a.work_completed - a.work_in_progress;
    s.add("simkq", "work_conserved", subj, std::abs(balance) / std::max(1.0, a.work_served), 1e-9);
  });

  s.guard("simkq", "service_discipline", subj, [&] {
    cfg.k = 2;
    double worst = 0.0;
    const SimReport rep = simulate(cfg, rank, [&](const DecisionView& v) {
      double total = 0.0;
      double top = -kInfinity;
      for (const auto& j : v.served) {
        total += j.rate;
        worst = std::max(worst, j.rate - 1.0 / v.k);
        top = std::max(top, j.rank);
      }
      worst = std::max(worst, total - 1.0);
      if (v.best_waiting) {
        worst = std::max(worst, 1.0 - total);  // never idle with work waiting
        if (p != Policy::SRPT)
          worst = std::max(worst, (top - v.best_waiting->rank) / std::max(1.0, std::abs(top)));
      }
    });
    s.add("simkq", "service_discipline", subj, worst, 1e-9);
    if (rank && rank->monotone()) {
      const double bound = mgk_bound(*rank, d, cfg.lambda, 2);
      s.add("simkq", "multiserver_bound", subj, std::max(0.0, rep.mean_T - rep.ci_half - bound), 0.0);
    }
  });

  if (!rank || !rank->monotone()) return;
  const double x = d.tail_inverse(0.5);
  if (rank->cutoffs(x).z == kInfinity) return;
  s.guard("simkq", "coupling", subj, [&] {
    cfg.k = 1;
    const CoupledTrace one = simulate_coupled(cfg, x, rank);
    s.add("simkq", "coupling_single_server", subj, one.max_delta, 1e-9);
    cfg.k = 2;
    const CoupledTrace two = simulate_coupled(cfg, x, rank);
    s.add("simkq", "coupling_bound", subj, std::max(0.0, two.max_delta - two.bound), 1e-9);
  });
}

}  // namespace

VerifyMatrix default_verify_matrix() {
  VerifyMatrix m;
  m.dists = {"exp(rate=1)", "hyperexp(p=0.9:0.1,mu=2:0.05)", "boundedpareto(xm=1,alpha=1.5,xmax=100)"};
  m.rhos = {0.5, 0.8, 0.9};
  m.policies = {Policy::FCFS, Policy::FB, Policy::MSERPT, Policy::MGittins};
  return m;
}

std::vector<InvariantResult> run_invariants(const VerifyMatrix& m) {
  if (m.dists.empty() || m.rhos.empty() || m.policies.empty())
    fail(ErrorCode::InvalidArgument, "verify matrix is empty");
  for (double rho : m.rhos)
    if (!(rho > 0.0 && rho < 1.0)) fail(ErrorCode::InvalidArgument, "verify loads must lie in (0, 1)");
  if (m.simulate && m.sim_jobs < 12500)
    fail(ErrorCode::InvalidArgument, "verify needs at least 12500 simulated jobs per check");
  std::vector<SizeDistribution> dists;
  for (const std::string& spec : m.dists) dists.push_back(parse_distribution(spec));

  Suite s;
  check_fixed_rank_laws(s);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const SizeDistribution& d = dists[i];
    const std::string name = d.describe();
    check_distribution(s, d, name);
    if (d.has_atoms()) continue;  // ranks from hazards need a continuous law

    std::optional<Ranks> envs;
    s.guard("rank", "build", name, [&] {
      envs = Ranks{RankFunction::build(Policy::MSERPT, d), RankFunction::build(Policy::MGittins, d)};
    });
    if (envs) check_ranks(s, d, name, *envs);

    std::map<Policy, RankFunction> ranks;
    for (Policy p : m.policies) {
      if (p == Policy::SRPT) continue;
      s.guard("rank", "build", std::string(policy_name(p)) + " " + name,
              [&] { ranks.emplace(p, RankFunction::build(p, d)); });
    }
    std::map<Policy, RankFunction> monotone;
    for (const auto& [p, r] : ranks)
      if (r.monotone()) monotone.emplace(p, r);
    check_mg1(s, d, name, m, monotone);

    if (!m.simulate) continue;
    for (Policy p : m.policies) {
      auto it = ranks.find(p);
      if (p != Policy::SRPT && it == ranks.end()) continue;
      check_sim(s, d, name, m, p, p == Policy::SRPT ? nullptr : &it->second);
    }
  }
  return s.out;
}

}  // namespace soapmgk
