#include "soapmgk/soapmgk.h"

#include "soapmgk/dist_spec.hpp"
#include "soapmgk/error.hpp"
#include "soapmgk/mg1.hpp"
#include "soapmgk/sim.hpp"
#include "soapmgk/verify.hpp"

#include <cstring>
#include <new>
#include <optional>
#include <string>
#include <vector>

struct soap_dist {
  soapmgk::SizeDistribution d;
};

struct soap_rank {
  soapmgk::RankFunction r;
};

struct soap_sim_result {
  soapmgk::SimReport rep;
};

struct soap_verify_result {
  std::vector<soapmgk::InvariantResult> rows;
};

namespace {

using namespace soapmgk;

thread_local std::string g_last_error;

soap_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return SOAP_ERR_INVALID_ARGUMENT;
    case ErrorCode::ParseError: return SOAP_ERR_PARSE;
    case ErrorCode::Overload: return SOAP_ERR_OVERLOAD;
    case ErrorCode::UnsupportedPoint: return SOAP_ERR_UNSUPPORTED_POINT;
    case ErrorCode::Degenerate: return SOAP_ERR_DEGENERATE;
    case ErrorCode::NoSolution: return SOAP_ERR_NO_SOLUTION;
    case ErrorCode::BadBracket: return SOAP_ERR_BAD_BRACKET;
    case ErrorCode::ToleranceNotMet: return SOAP_ERR_TOLERANCE_NOT_MET;
    case ErrorCode::NotApplicable: return SOAP_ERR_NOT_APPLICABLE;
    case ErrorCode::BranchMismatch: return SOAP_ERR_BRANCH_MISMATCH;
    case ErrorCode::Unsupported: return SOAP_ERR_UNSUPPORTED;
    case ErrorCode::NonConvergence: return SOAP_ERR_NON_CONVERGENCE;
  }
  return SOAP_ERR_INTERNAL;
}

// Runs body, translating exceptions into a status and the thread's message.
template <class F>
soap_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SOAP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return SOAP_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

size_t copy_out(const std::string& s, char* buf, size_t cap) {
  if (buf && cap > 0) {
    const size_t n = std::min(s.size(), cap - 1);
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return s.size();
}

Policy to_policy(soap_policy p) {
  if (p < SOAP_POLICY_FCFS || p > SOAP_POLICY_SRPT) fail(ErrorCode::InvalidArgument, "unknown policy");
  return static_cast<Policy>(p);
}

SimConfig to_config(const soap_dist* dist, const soap_sim_config* cfg) {
  need(dist, "distribution");
  need(cfg, "simulation config");
  SimConfig c;
  c.dist = dist->d;
  c.lambda = cfg->lambda;
  c.k = cfg->k;
  c.policy = to_policy(cfg->policy);
  c.n_jobs = cfg->n_jobs;
  c.warmup_fraction = cfg->warmup_fraction;
  c.seed = cfg->seed;
  c.quantum = cfg->quantum;
  c.batches = cfg->batches;
  c.size_bins = cfg->size_bins;
  return c;
}

// Static copy of the default verify matrix in C layout.
struct DefaultMatrix {
  VerifyMatrix m = default_verify_matrix();
  std::vector<std::string> names;
  std::vector<const char*> dists;
  std::vector<double> rhos;
  std::vector<soap_policy> policies;

  DefaultMatrix() : names(m.dists), rhos(m.rhos) {
    for (const std::string& n : names) dists.push_back(n.c_str());
    for (Policy p : m.policies) policies.push_back(static_cast<soap_policy>(p));
  }
};

static_assert(static_cast<int>(Policy::FCFS) == SOAP_POLICY_FCFS);
static_assert(static_cast<int>(Policy::MSERPT) == SOAP_POLICY_M_SERPT);
static_assert(static_cast<int>(Policy::SRPT) == SOAP_POLICY_SRPT);

}  // namespace

extern "C" {

const char* soap_last_error(void) { return g_last_error.c_str(); }

const char* soap_status_name(soap_status status) {
  switch (status) {
    case SOAP_OK: return "ok";
    case SOAP_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case SOAP_ERR_PARSE: return "parse-error";
    case SOAP_ERR_OVERLOAD: return "overload";
    case SOAP_ERR_UNSUPPORTED_POINT: return "unsupported-point";
    case SOAP_ERR_DEGENERATE: return "degenerate";
    case SOAP_ERR_NO_SOLUTION: return "no-solution";
    case SOAP_ERR_BAD_BRACKET: return "bad-bracket";
    case SOAP_ERR_TOLERANCE_NOT_MET: return "tolerance-not-met";
    case SOAP_ERR_NOT_APPLICABLE: return "not-applicable";
    case SOAP_ERR_BRANCH_MISMATCH: return "branch-mismatch";
    case SOAP_ERR_UNSUPPORTED: return "unsupported";
    case SOAP_ERR_NON_CONVERGENCE: return "non-convergence";
    case SOAP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

soap_status soap_policy_parse(const char* name, soap_policy* out) {
  return guarded([&] {
    need(name, "policy name");
    need(out, "output");
    *out = static_cast<soap_policy>(parse_policy(name));
  });
}

const char* soap_policy_name(soap_policy policy) {
  if (policy < SOAP_POLICY_FCFS || policy > SOAP_POLICY_SRPT) return "unknown";
  return policy_name(static_cast<Policy>(policy));
}

int soap_policy_is_monotone(soap_policy policy) {
  if (policy < SOAP_POLICY_FCFS || policy > SOAP_POLICY_SRPT) return 0;
  return policy_is_monotone(static_cast<Policy>(policy)) ? 1 : 0;
}

soap_status soap_dist_parse(const char* spec, soap_dist** out) {
  return guarded([&] {
    need(spec, "distribution spec");
    need(out, "output");
    *out = new soap_dist{parse_distribution(spec)};
  });
}

void soap_dist_free(soap_dist* dist) { delete dist; }

size_t soap_dist_describe(const soap_dist* dist, char* buf, size_t cap) {
  return dist ? copy_out(dist->d.describe(), buf, cap) : copy_out("", buf, cap);
}

size_t soap_dist_classes(const soap_dist* dist, char* buf, size_t cap) {
  return dist ? copy_out(dist->d.declared_classes().to_string(), buf, cap) : copy_out("", buf, cap);
}

double soap_dist_mean(const soap_dist* dist) { return dist ? dist->d.mean() : 0.0; }
double soap_dist_second_moment(const soap_dist* dist) { return dist ? dist->d.second_moment() : 0.0; }
double soap_dist_support_inf(const soap_dist* dist) { return dist ? dist->d.support_inf() : 0.0; }
double soap_dist_support_sup(const soap_dist* dist) { return dist ? dist->d.support_sup() : 0.0; }
double soap_dist_horizon(const soap_dist* dist) { return dist ? dist->d.truncation_horizon() : 0.0; }
int soap_dist_has_atoms(const soap_dist* dist) { return dist && dist->d.has_atoms() ? 1 : 0; }

soap_status soap_dist_tail(const soap_dist* dist, double x, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = dist->d.tail(x);
  });
}

soap_status soap_dist_hazard(const soap_dist* dist, double a, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = dist->d.hazard(a);
  });
}

soap_status soap_dist_truncated_moments(const soap_dist* dist, double a, double* m1, double* m2) {
  return guarded([&] {
    need(dist, "distribution");
    need(m1, "output");
    need(m2, "output");
    const TruncatedMoments m = dist->d.truncated_moments(a);
    *m1 = m.m1;
    *m2 = m.m2;
  });
}

soap_status soap_dist_excess_tail(const soap_dist* dist, double x, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = dist->d.excess_tail(x);
  });
}

soap_status soap_dist_excess_tail_inverse(const soap_dist* dist, double q, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = dist->d.excess_tail_inverse(q);
  });
}

soap_status soap_dist_tail_inverse(const soap_dist* dist, double u, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = dist->d.tail_inverse(u);
  });
}

soap_status soap_eta(const soap_dist* dist, double a, double b, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = eta(dist->d, a, b);
  });
}

soap_status soap_serpt_rank(const soap_dist* dist, double a, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = serpt_rank(dist->d, a);
  });
}

soap_status soap_gittins_rank(const soap_dist* dist, double a, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = gittins_rank(dist->d, a);
  });
}

soap_status soap_peak_age(const soap_dist* dist, double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = peak_age(dist->d);
  });
}

soap_status soap_rank_build(const soap_dist* dist, soap_policy policy, soap_rank** out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    *out = new soap_rank{RankFunction::build(to_policy(policy), dist->d)};
  });
}

soap_status soap_rank_from_points(const double* ages, const double* ranks, size_t n,
                                  double support_sup, soap_rank** out) {
  return guarded([&] {
    need(ages, "ages");
    need(ranks, "ranks");
    need(out, "output");
    *out = new soap_rank{RankFunction::from_points(std::vector<double>(ages, ages + n),
                                                   std::vector<double>(ranks, ranks + n),
                                                   Policy::SERPT, support_sup)};
  });
}

soap_status soap_rank_envelope(const soap_rank* base, soap_rank** out) {
  return guarded([&] {
    need(base, "rank");
    need(out, "output");
    *out = new soap_rank{monotone_envelope(base->r)};
  });
}

void soap_rank_free(soap_rank* rank) { delete rank; }

int soap_rank_is_monotone(const soap_rank* rank) { return rank && rank->r.monotone() ? 1 : 0; }

size_t soap_rank_nodes(const soap_rank* rank, double* ages, double* ranks, size_t cap) {
  if (!rank) return 0;
  const auto& a = rank->r.ages();
  const auto& r = rank->r.ranks();
  for (size_t i = 0; i < a.size() && i < cap; ++i) {
    if (ages) ages[i] = a[i];
    if (ranks) ranks[i] = r[i];
  }
  return a.size();
}

soap_status soap_rank_eval(const soap_rank* rank, double a, double* out) {
  return guarded([&] {
    need(rank, "rank");
    need(out, "output");
    if (!(a >= 0.0)) fail(ErrorCode::InvalidArgument, "age must be nonnegative");
    *out = rank->r(a);
  });
}

soap_status soap_rank_cutoffs(const soap_rank* rank, double x, double* y, double* z) {
  return guarded([&] {
    need(rank, "rank");
    need(y, "output");
    need(z, "output");
    const AgeCutoffs c = rank->r.cutoffs(x);
    *y = c.y;
    *z = c.z;
  });
}

soap_status soap_next_crossing_time(const soap_rank* rank, double age, double waiting_rank,
                                    double* out, int* found) {
  return guarded([&] {
    need(rank, "rank");
    need(out, "output");
    need(found, "output");
    const auto t = next_crossing_time(rank->r, age, waiting_rank);
    *found = t ? 1 : 0;
    *out = t ? *t : kInfinity;
  });
}

soap_status soap_cutoff_growth(const soap_rank* rank, const soap_dist* dist, const double* sizes,
                               size_t n, soap_growth_summary* out) {
  return guarded([&] {
    need(rank, "rank");
    need(dist, "distribution");
    need(out, "output");
    if (n > 0) need(sizes, "sizes");
    const auto rep = cutoff_growth_diagnostic(rank->r, dist->d, std::vector<double>(sizes, sizes + n));
    out->mode = static_cast<int>(rep.mode);
    out->gamma = rep.gamma;
    out->min_upper = rep.min_upper;
    out->max_upper = rep.max_upper;
    out->min_lower = rep.min_lower;
    out->max_lower = rep.max_lower;
  });
}

soap_status soap_load_profile(const soap_dist* dist, double lambda, double a, double* coload,
                              double* tau) {
  return guarded([&] {
    need(dist, "distribution");
    need(coload, "output");
    need(tau, "output");
    const LoadProfile lp(dist->d, lambda);
    *coload = lp.coload(a);
    *tau = lp.tau(a);
  });
}

soap_status soap_mg1_metrics(const soap_rank* rank, const soap_dist* dist, double lambda,
                             soap_metrics* out) {
  return guarded([&] {
    need(rank, "rank");
    need(dist, "distribution");
    need(out, "output");
    const Mg1Metrics m = mg1_metrics(rank->r, dist->d, lambda);
    *out = {m.Q, m.R, m.S, m.T};
  });
}

soap_status soap_mg1_key_quantities(const soap_rank* rank, const soap_dist* dist, double lambda,
                                    soap_key_quantities* out) {
  return guarded([&] {
    need(rank, "rank");
    need(dist, "distribution");
    need(out, "output");
    const KeyQuantities k = key_quantities(rank->r, dist->d, lambda);
    *out = {k.Qa, k.Qb, k.Rb, k.Rc, k.Sb, k.Sc};
  });
}

soap_status soap_mg1_metrics_alt(const soap_rank* rank, const soap_dist* dist, double lambda,
                                 int fault, soap_metrics* out) {
  return guarded([&] {
    need(rank, "rank");
    need(dist, "distribution");
    need(out, "output");
    const Mg1Metrics m = mg1_metrics_alt(rank->r, dist->d, lambda, fault != 0);
    *out = {m.Q, m.R, m.S, m.T};
  });
}

soap_status soap_mgk_bound(const soap_rank* rank, const soap_dist* dist, double lambda, int k,
                           double* out) {
  return guarded([&] {
    need(rank, "rank");
    need(dist, "distribution");
    need(out, "output");
    *out = mgk_bound(rank->r, dist->d, lambda, k);
  });
}

soap_status soap_mgk_bound_at(const soap_rank* rank, const soap_dist* dist, double lambda, int k,
                              double x, double* out) {
  return guarded([&] {
    need(rank, "rank");
    need(dist, "distribution");
    need(out, "output");
    *out = mgk_bound_at(rank->r, dist->d, lambda, k, x);
  });
}

soap_status soap_heavy_traffic_scale(const soap_dist* dist, double rho, soap_branch branch,
                                     double* out) {
  return guarded([&] {
    need(dist, "distribution");
    need(out, "output");
    if (branch != SOAP_BRANCH_IV && branch != SOAP_BRANCH_FV)
      fail(ErrorCode::InvalidArgument, "unknown heavy-traffic branch");
    *out = heavy_traffic_scale(dist->d, rho, branch == SOAP_BRANCH_IV ? TrafficBranch::IV : TrafficBranch::FV);
  });
}

void soap_sim_config_default(soap_sim_config* cfg) {
  if (!cfg) return;
  const SimConfig d;
  cfg->policy = static_cast<soap_policy>(d.policy);
  cfg->lambda = d.lambda;
  cfg->k = d.k;
  cfg->n_jobs = d.n_jobs;
  cfg->warmup_fraction = d.warmup_fraction;
  cfg->seed = d.seed;
  cfg->quantum = d.quantum;
  cfg->batches = d.batches;
  cfg->size_bins = d.size_bins;
}

soap_status soap_simulate(const soap_dist* dist, const soap_rank* rank, const soap_sim_config* cfg,
                          soap_sim_result** out) {
  return guarded([&] {
    need(out, "output");
    const SimConfig c = to_config(dist, cfg);
    *out = new soap_sim_result{simulate(c, rank ? &rank->r : nullptr)};
  });
}

void soap_sim_result_free(soap_sim_result* res) { delete res; }

void soap_sim_result_summary(const soap_sim_result* res, soap_sim_summary* out) {
  if (!res || !out) return;
  const SimReport& r = res->rep;
  *out = {r.mean_T,      r.ci_half,        r.throughput,        r.max_queue,
          r.measured,    r.events,         r.seed,              r.work_served,
          r.work_completed, r.work_in_progress, r.bins.size(), r.batch_means.size()};
}

soap_status soap_sim_result_bin(const soap_sim_result* res, size_t i, soap_size_bin* out) {
  return guarded([&] {
    need(res, "result");
    need(out, "output");
    if (i >= res->rep.bins.size()) fail(ErrorCode::InvalidArgument, "bin index out of range");
    const SizeBin& b = res->rep.bins[i];
    *out = {b.lo, b.hi, b.count, b.mean_T};
  });
}

soap_status soap_sim_result_batch_mean(const soap_sim_result* res, size_t i, double* out) {
  return guarded([&] {
    need(res, "result");
    need(out, "output");
    if (i >= res->rep.batch_means.size()) fail(ErrorCode::InvalidArgument, "batch index out of range");
    *out = res->rep.batch_means[i];
  });
}

soap_status soap_simulate_coupled(const soap_dist* dist, const soap_rank* rank,
                                  const soap_sim_config* cfg, double x, soap_coupled_trace* out) {
  return guarded([&] {
    need(out, "output");
    const SimConfig c = to_config(dist, cfg);
    const CoupledTrace t = simulate_coupled(c, x, rank ? &rank->r : nullptr);
    *out = {t.x, t.z, t.bound, t.max_delta, t.events, t.violations};
  });
}

void soap_verify_config_default(soap_verify_config* cfg) {
  if (!cfg) return;
  static const DefaultMatrix d;
  cfg->dists = d.dists.data();
  cfg->n_dists = d.dists.size();
  cfg->rhos = d.rhos.data();
  cfg->n_rhos = d.rhos.size();
  cfg->policies = d.policies.data();
  cfg->n_policies = d.policies.size();
  cfg->simulate = d.m.simulate ? 1 : 0;
  cfg->sim_jobs = d.m.sim_jobs;
  cfg->seed = d.m.seed;
  cfg->fault = 0;
}

soap_status soap_verify_run(const soap_verify_config* cfg, soap_verify_result** out) {
  return guarded([&] {
    need(cfg, "verify config");
    need(out, "output");
    VerifyMatrix m;
    if (cfg->n_dists) need(cfg->dists, "distribution list");
    if (cfg->n_rhos) need(cfg->rhos, "load list");
    if (cfg->n_policies) need(cfg->policies, "policy list");
    for (size_t i = 0; i < cfg->n_dists; ++i) {
      need(cfg->dists[i], "distribution spec");
      m.dists.emplace_back(cfg->dists[i]);
    }
    m.rhos.assign(cfg->rhos, cfg->rhos + cfg->n_rhos);
    for (size_t i = 0; i < cfg->n_policies; ++i) m.policies.push_back(to_policy(cfg->policies[i]));
    m.simulate = cfg->simulate != 0;
    m.sim_jobs = cfg->sim_jobs;
    m.seed = cfg->seed;
    m.fault = cfg->fault != 0;
    *out = new soap_verify_result{run_invariants(m)};
  });
}

void soap_verify_result_free(soap_verify_result* res) { delete res; }

size_t soap_verify_result_count(const soap_verify_result* res) { return res ? res->rows.size() : 0; }

size_t soap_verify_result_failures(const soap_verify_result* res) {
  if (!res) return 0;
  size_t n = 0;
  for (const auto& r : res->rows) n += r.passed ? 0 : 1;
  return n;
}

soap_status soap_verify_result_row(const soap_verify_result* res, size_t i,
                                   soap_invariant_row* out) {
  return guarded([&] {
    need(res, "result");
    need(out, "output");
    if (i >= res->rows.size()) fail(ErrorCode::InvalidArgument, "row index out of range");
    const InvariantResult& r = res->rows[i];
    *out = {r.module.c_str(), r.name.c_str(), r.subject.c_str(), r.passed ? 1 : 0, r.worst,
            r.detail.c_str()};
  });
}

}  // extern "C"
