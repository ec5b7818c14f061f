#pragma once

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define SOAP_API __attribute__((visibility("default")))
#else
#define SOAP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returning soap_status reports failures through the code and
   leaves a message for soap_last_error() on the calling thread. Outputs are
   written only on success. */
typedef enum soap_status {
  SOAP_OK = 0,
  SOAP_ERR_INVALID_ARGUMENT = 1,
  SOAP_ERR_PARSE = 2,
  SOAP_ERR_OVERLOAD = 3,
  SOAP_ERR_UNSUPPORTED_POINT = 4,
  SOAP_ERR_DEGENERATE = 5,
  SOAP_ERR_NO_SOLUTION = 6,
  SOAP_ERR_BAD_BRACKET = 7,
  SOAP_ERR_TOLERANCE_NOT_MET = 8,
  SOAP_ERR_NOT_APPLICABLE = 9,
  SOAP_ERR_BRANCH_MISMATCH = 10,
  SOAP_ERR_UNSUPPORTED = 11,
  SOAP_ERR_NON_CONVERGENCE = 12,
  SOAP_ERR_INTERNAL = 99
} soap_status;

typedef enum soap_policy {
  SOAP_POLICY_FCFS = 0,
  SOAP_POLICY_FB = 1,
  SOAP_POLICY_SERPT = 2,
  SOAP_POLICY_M_SERPT = 3,
  SOAP_POLICY_GITTINS = 4,
  SOAP_POLICY_M_GITTINS = 5,
  SOAP_POLICY_SRPT = 6
} soap_policy;

typedef enum soap_branch { SOAP_BRANCH_IV = 0, SOAP_BRANCH_FV = 1 } soap_branch;

typedef struct soap_dist soap_dist;
typedef struct soap_rank soap_rank;
typedef struct soap_sim_result soap_sim_result;
typedef struct soap_verify_result soap_verify_result;

SOAP_API const char* soap_last_error(void);
SOAP_API const char* soap_status_name(soap_status status);

/* Policies */
SOAP_API soap_status soap_policy_parse(const char* name, soap_policy* out);
SOAP_API const char* soap_policy_name(soap_policy policy);
SOAP_API int soap_policy_is_monotone(soap_policy policy);

/* Size distributions, e.g. "exp(rate=1)" or
   "boundedpareto(xm=1,alpha=1.5,xmax=100)". */
SOAP_API soap_status soap_dist_parse(const char* spec, soap_dist** out);
SOAP_API void soap_dist_free(soap_dist* dist);
/* Canonical spec string. Returns the length needed (without the NUL); writes
   at most cap bytes including the NUL. */
SOAP_API size_t soap_dist_describe(const soap_dist* dist, char* buf, size_t cap);
SOAP_API size_t soap_dist_classes(const soap_dist* dist, char* buf, size_t cap);
SOAP_API double soap_dist_mean(const soap_dist* dist);
SOAP_API double soap_dist_second_moment(const soap_dist* dist);
SOAP_API double soap_dist_support_inf(const soap_dist* dist);
SOAP_API double soap_dist_support_sup(const soap_dist* dist); /* +inf if unbounded */
SOAP_API double soap_dist_horizon(const soap_dist* dist);     /* tail below 1e-12 past here */
SOAP_API int soap_dist_has_atoms(const soap_dist* dist);
SOAP_API soap_status soap_dist_tail(const soap_dist* dist, double x, double* out);
SOAP_API soap_status soap_dist_hazard(const soap_dist* dist, double a, double* out);
SOAP_API soap_status soap_dist_truncated_moments(const soap_dist* dist, double a, double* m1, double* m2);
SOAP_API soap_status soap_dist_excess_tail(const soap_dist* dist, double x, double* out);
SOAP_API soap_status soap_dist_excess_tail_inverse(const soap_dist* dist, double q, double* out);
SOAP_API soap_status soap_dist_tail_inverse(const soap_dist* dist, double u, double* out);

/* Rank functions */
SOAP_API soap_status soap_eta(const soap_dist* dist, double a, double b, double* out);
SOAP_API soap_status soap_serpt_rank(const soap_dist* dist, double a, double* out);
SOAP_API soap_status soap_gittins_rank(const soap_dist* dist, double a, double* out);
SOAP_API soap_status soap_peak_age(const soap_dist* dist, double* out);

SOAP_API soap_status soap_rank_build(const soap_dist* dist, soap_policy policy, soap_rank** out);
/* Raw piecewise-linear table; ages strictly increasing. */
SOAP_API soap_status soap_rank_from_points(const double* ages, const double* ranks, size_t n,
                                           double support_sup, soap_rank** out);
SOAP_API soap_status soap_rank_envelope(const soap_rank* base, soap_rank** out);
SOAP_API void soap_rank_free(soap_rank* rank);
SOAP_API int soap_rank_is_monotone(const soap_rank* rank);
SOAP_API size_t soap_rank_nodes(const soap_rank* rank, double* ages, double* ranks, size_t cap);
SOAP_API soap_status soap_rank_eval(const soap_rank* rank, double a, double* out);
SOAP_API soap_status soap_rank_cutoffs(const soap_rank* rank, double x, double* y, double* z);
/* Service from age until the rank reaches waiting_rank; *found = 0 if never. */
SOAP_API soap_status soap_next_crossing_time(const soap_rank* rank, double age, double waiting_rank,
                                             double* out, int* found);

typedef struct soap_growth_summary {
  int mode; /* 0 not applicable, 1 OR, 2 QDHR, 3 QIMRL */
  double gamma;
  double min_upper;
  double max_upper;
  double min_lower;
  double max_lower;
} soap_growth_summary;

SOAP_API soap_status soap_cutoff_growth(const soap_rank* rank, const soap_dist* dist, const double* sizes,
                                        size_t n, soap_growth_summary* out);

/* M/G/1 analysis of monotone policies */
typedef struct soap_metrics {
  double Q;
  double R;
  double S; /* may be +inf */
  double T;
} soap_metrics;

typedef struct soap_key_quantities {
  double Qa;
  double Qb;
  double Rb;
  double Rc;
  double Sb;
  double Sc; /* may be +inf */
} soap_key_quantities;

SOAP_API soap_status soap_load_profile(const soap_dist* dist, double lambda, double a, double* coload,
                                       double* tau);
SOAP_API soap_status soap_mg1_metrics(const soap_rank* rank, const soap_dist* dist, double lambda,
                                      soap_metrics* out);
SOAP_API soap_status soap_mg1_key_quantities(const soap_rank* rank, const soap_dist* dist, double lambda,
                                             soap_key_quantities* out);
/* fault != 0 flips the sign of one term (negative control for tests). */
SOAP_API soap_status soap_mg1_metrics_alt(const soap_rank* rank, const soap_dist* dist, double lambda,
                                          int fault, soap_metrics* out);
SOAP_API soap_status soap_mgk_bound(const soap_rank* rank, const soap_dist* dist, double lambda, int k,
                                    double* out);
SOAP_API soap_status soap_mgk_bound_at(const soap_rank* rank, const soap_dist* dist, double lambda, int k,
                                       double x, double* out);
SOAP_API soap_status soap_heavy_traffic_scale(const soap_dist* dist, double rho, soap_branch branch,
                                              double* out);

/* Simulation */
typedef struct soap_sim_config {
  soap_policy policy;
  double lambda;
  int k;
  uint64_t n_jobs; /* warm-up plus measured */
  double warmup_fraction;
  uint64_t seed;
  double quantum; /* 0 selects 1e-3 E[X] */
  int batches;
  int size_bins;
} soap_sim_config;

typedef struct soap_sim_summary {
  double mean_T;
  double ci_half;
  double throughput;
  uint64_t max_queue;
  uint64_t measured;
  uint64_t events;
  uint64_t seed;
  double work_served;
  double work_completed;
  double work_in_progress;
  size_t n_bins;
  size_t n_batches;
} soap_sim_summary;

typedef struct soap_size_bin {
  double lo;
  double hi;
  uint64_t count;
  double mean_T;
} soap_size_bin;

typedef struct soap_coupled_trace {
  double x;
  double z;
  double bound;
  double max_delta;
  uint64_t events;
  uint64_t violations;
} soap_coupled_trace;

SOAP_API void soap_sim_config_default(soap_sim_config* cfg);
/* rank may be NULL; it is built from the policy when needed. */
SOAP_API soap_status soap_simulate(const soap_dist* dist, const soap_rank* rank, const soap_sim_config* cfg,
                                   soap_sim_result** out);
SOAP_API void soap_sim_result_free(soap_sim_result* res);
SOAP_API void soap_sim_result_summary(const soap_sim_result* res, soap_sim_summary* out);
SOAP_API soap_status soap_sim_result_bin(const soap_sim_result* res, size_t i, soap_size_bin* out);
SOAP_API soap_status soap_sim_result_batch_mean(const soap_sim_result* res, size_t i, double* out);
SOAP_API soap_status soap_simulate_coupled(const soap_dist* dist, const soap_rank* rank,
                                           const soap_sim_config* cfg, double x, soap_coupled_trace* out);

/* Invariant suite */
typedef struct soap_verify_config {
  const char* const* dists;
  size_t n_dists;
  const double* rhos;
  size_t n_rhos;
  const soap_policy* policies;
  size_t n_policies;
  int simulate;
  uint64_t sim_jobs;
  uint64_t seed;
  int fault;
} soap_verify_config;

typedef struct soap_invariant_row {
  const char* module;
  const char* name;
  const char* subject;
  int passed;
  double worst;
  const char* detail;
} soap_invariant_row;

/* Fills cfg with the default matrix; the arrays are static. */
SOAP_API void soap_verify_config_default(soap_verify_config* cfg);
SOAP_API soap_status soap_verify_run(const soap_verify_config* cfg, soap_verify_result** out);
SOAP_API void soap_verify_result_free(soap_verify_result* res);
SOAP_API size_t soap_verify_result_count(const soap_verify_result* res);
SOAP_API size_t soap_verify_result_failures(const soap_verify_result* res);
/* Strings stay valid until the result is freed. */
SOAP_API soap_status soap_verify_result_row(const soap_verify_result* res, size_t i,
                                            soap_invariant_row* out);

#ifdef __cplusplus
}
#endif
