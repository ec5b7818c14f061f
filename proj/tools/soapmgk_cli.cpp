#include "soapmgk/soapmgk.h"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitParse = 2;
constexpr int kExitConfig = 3;

// A library failure carrying the exit code it maps to.
struct CliError {
  int code;
  std::string message;
};

int exit_code_of(soap_status s) {
  switch (s) {
    case SOAP_OK: return kExitOk;
    case SOAP_ERR_PARSE: return kExitParse;
    case SOAP_ERR_INVALID_ARGUMENT:
    case SOAP_ERR_OVERLOAD:
    case SOAP_ERR_UNSUPPORTED_POINT:
    case SOAP_ERR_DEGENERATE:
    case SOAP_ERR_NOT_APPLICABLE:
    case SOAP_ERR_BRANCH_MISMATCH:
    case SOAP_ERR_UNSUPPORTED: return kExitConfig;
    default: return kExitInvariant;
  }
}

void check(soap_status s) {
  if (s != SOAP_OK) throw CliError{exit_code_of(s), soap_last_error()};
}

struct DistDeleter {
  void operator()(soap_dist* d) const { soap_dist_free(d); }
};
struct RankDeleter {
  void operator()(soap_rank* r) const { soap_rank_free(r); }
};
struct SimDeleter {
  void operator()(soap_sim_result* r) const { soap_sim_result_free(r); }
};
struct VerifyDeleter {
  void operator()(soap_verify_result* r) const { soap_verify_result_free(r); }
};
using Dist = std::unique_ptr<soap_dist, DistDeleter>;
using Rank = std::unique_ptr<soap_rank, RankDeleter>;

Dist parse_dist(const std::string& spec) {
  soap_dist* d = nullptr;
  check(soap_dist_parse(spec.c_str(), &d));
  return Dist(d);
}

Rank build_rank(const soap_dist* d, soap_policy p) {
  soap_rank* r = nullptr;
  check(soap_rank_build(d, p, &r));
  return Rank(r);
}

std::string describe(const soap_dist* d) {
  std::string s(soap_dist_describe(d, nullptr, 0), '\0');
  soap_dist_describe(d, s.data(), s.size() + 1);
  return s;
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(std::uint64_t v) { return std::to_string(v); }

// RFC 4180 quoting for fields that contain separators or quotes.
std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_row(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  return out + "\n";
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur.erase(0, cur.find_first_not_of(" \t"));
    cur.erase(cur.find_last_not_of(" \t") + 1);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const std::string& t : split(s, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) throw CliError{kExitParse, std::string("bad number in ") + what + ": " + t};
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_ints(const std::string& s, const char* what) {
  std::vector<int> out;
  for (double v : parse_numbers(s, what)) {
    if (v != std::floor(v)) throw CliError{kExitParse, std::string("expected integers in ") + what};
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<soap_policy> parse_policies(const std::string& s) {
  std::vector<soap_policy> out;
  for (const std::string& t : split(s, ',')) {
    soap_policy p;
    check(soap_policy_parse(t.c_str(), &p));
    out.push_back(p);
  }
  return out;
}

// Output sink: a file when a path is given, stdout otherwise.
class Sink {
public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw CliError{kExitConfig, "cannot open output file " + path};
  }
  void write(const std::string& s) {
    std::ostream& os = file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout;
    os << s;
    os.flush();
  }

private:
  std::ofstream file_;
};

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SOAP_MGK_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1)
      throw CliError{kExitConfig, std::string("SOAP_MGK_THREADS must be a positive integer, got ") + env};
    n = std::min<long>(n, cap);
  }
  return std::max(1, n);
}

// Runs cells on up to `workers` threads and hands finished cells to `emit`
// in index order as soon as all earlier ones are done.
void run_ordered(std::size_t count, int workers, const std::function<void(std::size_t)>& cell,
                 const std::function<void(std::size_t)>& emit) {
  std::vector<char> done(count, 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      cell(i);
      {
        std::lock_guard<std::mutex> lock(mu);
        done[i] = 1;
      }
      cv.notify_all();
    }
  };
  std::vector<std::thread> pool;
  const int n = static_cast<int>(std::min<std::size_t>(workers, count));
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  if (n <= 1) {
    work();
  } else {
    pool.emplace_back(work);
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return done[i] != 0; });
    lock.unlock();
    emit(i);
  }
  for (std::thread& t : pool) t.join();
}

// Loads given either as utilisations or as arrival rates.
struct Loads {
  std::vector<double> lambdas;
  std::vector<double> rhos;
};

Loads resolve_loads(const soap_dist* d, const std::string& rho, const std::string& lambda) {
  if (!rho.empty() && !lambda.empty()) throw CliError{kExitConfig, "give either --rho or --lambda, not both"};
  Loads l;
  const double mean = soap_dist_mean(d);
  if (!lambda.empty()) {
    l.lambdas = parse_numbers(lambda, "--lambda");
    for (double x : l.lambdas) l.rhos.push_back(x * mean);
  } else {
    l.rhos = parse_numbers(rho, "--rho");
    for (double r : l.rhos) l.lambdas.push_back(r / mean);
  }
  if (l.rhos.empty()) throw CliError{kExitConfig, "no load given"};
  for (std::size_t i = 0; i < l.rhos.size(); ++i)
    if (!(l.lambdas[i] > 0.0) || !(l.rhos[i] < 1.0))
      throw CliError{kExitConfig, "every load needs lambda > 0 and rho < 1, got rho = " + num(l.rhos[i])};
  return l;
}

std::vector<double> age_grid(const soap_dist* d, int points) {
  if (points < 2) throw CliError{kExitConfig, "--points must be at least 2"};
  const double sup = soap_dist_support_sup(d);
  const double hi = std::isfinite(sup) ? sup : soap_dist_horizon(d);
  const double lo = std::min(1e-3 * soap_dist_mean(d), hi * 1e-3);
  std::vector<double> g{0.0};
  const double step = std::log(hi / lo) / (points - 2);
  for (int i = 0; i < points - 1; ++i) g.push_back(i == points - 2 ? hi : lo * std::exp(step * i));
  return g;
}

// ---------------------------------------------------------------- rank

struct RankOpts {
  std::string dist;
  std::string policy = "m-gittins";
  int points = 200;
  std::string out;
  std::string cutoffs_out;
};

int cmd_rank(const RankOpts& o) {
  Dist d = parse_dist(o.dist);
  soap_policy cut_policy;
  check(soap_policy_parse(o.policy.c_str(), &cut_policy));
  const std::vector<double> ages = age_grid(d.get(), o.points);
  Rank tables[4] = {build_rank(d.get(), SOAP_POLICY_SERPT), build_rank(d.get(), SOAP_POLICY_M_SERPT),
                    build_rank(d.get(), SOAP_POLICY_GITTINS), build_rank(d.get(), SOAP_POLICY_M_GITTINS)};
  Rank cut = build_rank(d.get(), cut_policy);
  if (!soap_rank_is_monotone(cut.get()))
    throw CliError{kExitConfig, std::string("age cutoffs need a monotone policy, got ") + o.policy};

  std::string text = "age,rank_serpt,rank_mserpt,rank_gittins,rank_mgittins\n";
  for (double a : ages) {
    std::vector<std::string> row{num(a)};
    for (const Rank& t : tables) {
      double v;
      check(soap_rank_eval(t.get(), a, &v));
      row.push_back(num(v));
    }
    text += join_row(row);
  }
  Sink(o.out).write(text);

  if (!o.cutoffs_out.empty()) {
    std::string ct = "size,y,z\n";
    for (double x : ages) {
      double y, z;
      check(soap_rank_cutoffs(cut.get(), x, &y, &z));
      ct += join_row({num(x), num(y), num(z)});
    }
    Sink(o.cutoffs_out).write(ct);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- mg1

struct Mg1Opts {
  std::string dist;
  std::string policy = "m-gittins";
  std::string rho;
  std::string lambda;
  int k = 1;
  std::string out;
};

int cmd_mg1(const Mg1Opts& o) {
  Dist d = parse_dist(o.dist);
  const auto policies = parse_policies(o.policy);
  if (policies.empty()) throw CliError{kExitConfig, "no policy given"};
  const Loads loads = resolve_loads(d.get(), o.rho, o.lambda);
  if (o.k < 1) throw CliError{kExitConfig, "--k must be at least 1"};
  const std::string name = field(describe(d.get()));

  std::string text = "policy,dist,lambda,rho,Q,R,S,T,Qa,Qb,Rb,Rc,Sb,Sc,bound_k\n";
  for (soap_policy p : policies) {
    if (!soap_policy_is_monotone(p))
      throw CliError{kExitConfig, std::string("analytic metrics need a monotone policy, got ") + soap_policy_name(p)};
    Rank r = build_rank(d.get(), p);
    for (std::size_t i = 0; i < loads.rhos.size(); ++i) {
      soap_metrics m;
      soap_key_quantities kq;
      double bound;
      check(soap_mg1_metrics(r.get(), d.get(), loads.lambdas[i], &m));
      check(soap_mg1_key_quantities(r.get(), d.get(), loads.lambdas[i], &kq));
      check(soap_mgk_bound(r.get(), d.get(), loads.lambdas[i], o.k, &bound));
      text += join_row({soap_policy_name(p), name, num(loads.lambdas[i]), num(loads.rhos[i]), num(m.Q),
                        num(m.R), num(m.S), num(m.T), num(kq.Qa), num(kq.Qb), num(kq.Rb), num(kq.Rc),
                        num(kq.Sb), num(kq.Sc), num(bound)});
    }
  }
  Sink(o.out).write(text);
  return kExitOk;
}

// ---------------------------------------------------------------- simulate / sweep

struct SimOpts {
  std::string dist;
  std::string policy = "m-gittins";
  std::string rho;
  std::string lambda;
  std::string k = "1";
  std::uint64_t n_jobs = 200000;
  std::uint64_t seed = 1;
  double quantum = 0.0;
  std::optional<double> tag_x;
  int jobs = 0;
  std::string out;
};

struct SimCell {
  SimCell(soap_policy p, double l, double r, int servers) : policy(p), lambda(l), rho(r), k(servers) {}
  soap_policy policy;
  double lambda;
  double rho;
  int k;
  bool ok = false;
  std::string error;
  int error_code = 0;
  soap_sim_summary summary{};
  std::optional<soap_coupled_trace> trace;
};

soap_sim_config sim_config(const SimOpts& o, soap_policy p, double lambda, int k) {
  soap_sim_config c;
  soap_sim_config_default(&c);
  c.policy = p;
  c.lambda = lambda;
  c.k = k;
  c.n_jobs = o.n_jobs;
  c.seed = o.seed;
  c.quantum = o.quantum;
  return c;
}

// Rank tables built once per policy and shared read-only by all cells.
struct RankCache {
  std::vector<std::pair<soap_policy, Rank>> items;
  void add(const soap_dist* d, soap_policy p) {
    if (p == SOAP_POLICY_SRPT || get(p)) return;
    items.emplace_back(p, build_rank(d, p));
  }
  const soap_rank* get(soap_policy p) const {
    for (const auto& [q, r] : items)
      if (q == p) return r.get();
    return nullptr;
  }
};

void run_cell(SimCell& c, const SimOpts& o, const soap_dist* d, const RankCache& ranks) {
  const soap_sim_config cfg = sim_config(o, c.policy, c.lambda, c.k);
  const soap_rank* r = ranks.get(c.policy);
  soap_sim_result* res = nullptr;
  soap_status s = soap_simulate(d, r, &cfg, &res);
  if (s == SOAP_OK) {
    std::unique_ptr<soap_sim_result, SimDeleter> hold(res);
    soap_sim_result_summary(res, &c.summary);
    if (o.tag_x) {
      soap_coupled_trace t;
      s = soap_simulate_coupled(d, r, &cfg, *o.tag_x, &t);
      if (s == SOAP_OK) c.trace = t;
    }
  }
  if (s != SOAP_OK) {
    c.error = soap_last_error();
    c.error_code = exit_code_of(s);
    return;
  }
  c.ok = true;
}

int cmd_simulate(const SimOpts& o) {
  Dist d = parse_dist(o.dist);
  const auto policies = parse_policies(o.policy);
  const auto ks = parse_ints(o.k, "--k");
  const Loads loads = resolve_loads(d.get(), o.rho, o.lambda);
  if (policies.empty() || ks.empty()) throw CliError{kExitConfig, "no policy or server count given"};
  RankCache ranks;
  for (soap_policy p : policies) ranks.add(d.get(), p);
  std::vector<SimCell> cells;
  for (soap_policy p : policies)
    for (std::size_t i = 0; i < loads.rhos.size(); ++i)
      for (int k : ks) cells.emplace_back(p, loads.lambdas[i], loads.rhos[i], k);

  const int workers = worker_count(o.jobs);
  const std::string name = field(describe(d.get()));
  Sink sink(o.out);
  sink.write("policy,dist,lambda,rho,k,n_jobs,seed,mean_T,ci_half,max_delta,delta_bound\n");
  int code = kExitOk;
  run_ordered(
      cells.size(), workers, [&](std::size_t i) { run_cell(cells[i], o, d.get(), ranks); },
      [&](std::size_t i) {
        const SimCell& c = cells[i];
        if (!c.ok) {
          std::cerr << "soapmgk: " << soap_policy_name(c.policy) << " rho=" << num(c.rho) << " k=" << c.k
                    << ": " << c.error << "\n";
          code = std::max(code, c.error_code);
          return;
        }
        sink.write(join_row({soap_policy_name(c.policy), name, num(c.lambda), num(c.rho), std::to_string(c.k),
                             num(o.n_jobs), num(o.seed), num(c.summary.mean_T), num(c.summary.ci_half),
                             c.trace ? num(c.trace->max_delta) : "", c.trace ? num(c.trace->bound) : ""}));
      });
  return code;
}

int cmd_sweep(const SimOpts& o) {
  Dist d = parse_dist(o.dist);
  const auto policies = parse_policies(o.policy);
  const auto ks = parse_ints(o.k, "--k");
  if (!o.lambda.empty()) throw CliError{kExitConfig, "sweep takes loads as --rho"};
  const Loads loads = resolve_loads(d.get(), o.rho, "");
  if (!std::is_sorted(loads.rhos.begin(), loads.rhos.end()))
    throw CliError{kExitConfig, "--rho must be ascending"};
  if (policies.empty() || ks.empty()) throw CliError{kExitConfig, "no policy or server count given"};
  if (soap_dist_has_atoms(d.get()))
    throw CliError{kExitConfig, "the Gittins baseline needs a distribution without atoms"};

  RankCache ranks;
  ranks.add(d.get(), SOAP_POLICY_GITTINS);
  for (soap_policy p : policies) ranks.add(d.get(), p);

  // Baselines (Gittins, k = 1) come first so rows can be emitted early.
  const std::size_t nb = loads.rhos.size();
  std::vector<SimCell> cells;
  for (std::size_t i = 0; i < nb; ++i) cells.emplace_back(SOAP_POLICY_GITTINS, loads.lambdas[i], loads.rhos[i], 1);
  for (soap_policy p : policies)
    for (std::size_t i = 0; i < nb; ++i)
      for (int k : ks) cells.emplace_back(p, loads.lambdas[i], loads.rhos[i], k);

  SimOpts plain = o;
  plain.tag_x.reset();
  const int workers = worker_count(o.jobs);
  const std::string name = field(describe(d.get()));
  Sink sink(o.out);
  sink.write(
      "policy,dist,lambda,rho,k,n_jobs,seed,analytic_T,bound,mean_T,ci_half,baseline_T,baseline_ci_half,ratio,"
      "status\n");
  int code = kExitOk;
  auto rho_index = [&](double rho) {
    return static_cast<std::size_t>(std::find(loads.rhos.begin(), loads.rhos.end(), rho) - loads.rhos.begin());
  };
  run_ordered(
      cells.size(), workers,
      [&](std::size_t i) {
        SimCell& c = cells[i];
        if (i >= nb && c.policy == SOAP_POLICY_GITTINS && c.k == 1) return;  // same as the baseline
        run_cell(c, plain, d.get(), ranks);
      },
      [&](std::size_t i) {
        if (i < nb) return;
        SimCell& c = cells[i];
        const SimCell& base = cells[rho_index(c.rho)];
        if (c.policy == SOAP_POLICY_GITTINS && c.k == 1) c = base;
        std::string analytic, bound, status = "ok";
        if (const soap_rank* r = ranks.get(c.policy); r && soap_rank_is_monotone(r)) {
          soap_metrics m;
          double b;
          if (soap_mg1_metrics(r, d.get(), c.lambda, &m) == SOAP_OK &&
              soap_mgk_bound(r, d.get(), c.lambda, c.k, &b) == SOAP_OK) {
            analytic = num(m.T);
            bound = num(b);
          } else {
            status = std::string("error: ") + soap_last_error();
          }
        }
        std::string mean, ci, ratio, bmean, bci;
        if (c.ok) {
          mean = num(c.summary.mean_T);
          ci = num(c.summary.ci_half);
        } else {
          status = "error: " + c.error;
          code = std::max(code, kExitInvariant);
        }
        if (base.ok) {
          bmean = num(base.summary.mean_T);
          bci = num(base.summary.ci_half);
          if (c.ok) ratio = num(c.summary.mean_T / base.summary.mean_T);
        } else {
          if (status == "ok") status = "error: baseline: " + base.error;
          code = std::max(code, kExitInvariant);
        }
        sink.write(join_row({soap_policy_name(c.policy), name, num(c.lambda), num(c.rho), std::to_string(c.k),
                             num(o.n_jobs), num(o.seed), analytic, bound, mean, ci, bmean, bci, ratio,
                             field(status)}));
      });
  return code;
}

// ---------------------------------------------------------------- verify

struct VerifyOpts {
  std::optional<std::string> dists;
  std::optional<std::string> rho;
  std::optional<std::string> policy;
  bool no_sim = false;
  std::uint64_t sim_jobs = 0;
  std::uint64_t seed = 1;
  bool fault = false;
  std::string out;
};

int cmd_verify(const VerifyOpts& o) {
  soap_verify_config cfg;
  soap_verify_config_default(&cfg);
  std::vector<std::string> dists;
  std::vector<const char*> dist_ptrs;
  std::vector<double> rhos;
  std::vector<soap_policy> policies;
  if (o.dists) {
    dists = split(*o.dists, ';');
    for (const std::string& s : dists) dist_ptrs.push_back(s.c_str());
    cfg.dists = dist_ptrs.data();
    cfg.n_dists = dist_ptrs.size();
  }
  if (o.rho) {
    rhos = parse_numbers(*o.rho, "--rho");
    cfg.rhos = rhos.data();
    cfg.n_rhos = rhos.size();
  }
  if (o.policy) {
    policies = parse_policies(*o.policy);
    cfg.policies = policies.data();
    cfg.n_policies = policies.size();
  }
  if (o.no_sim) cfg.simulate = 0;
  if (o.sim_jobs) cfg.sim_jobs = o.sim_jobs;
  cfg.seed = o.seed;
  cfg.fault = o.fault ? 1 : 0;

  soap_verify_result* raw = nullptr;
  check(soap_verify_run(&cfg, &raw));
  std::unique_ptr<soap_verify_result, VerifyDeleter> res(raw);
  std::string text = "module,invariant,case,status,worst,detail\n";
  const std::size_t n = soap_verify_result_count(raw);
  for (std::size_t i = 0; i < n; ++i) {
    soap_invariant_row r;
    check(soap_verify_result_row(raw, i, &r));
    text += join_row({r.module, r.name, field(r.subject), r.passed ? "pass" : "FAIL", num(r.worst), field(r.detail)});
  }
  Sink(o.out).write(text);
  const std::size_t failed = soap_verify_result_failures(raw);
  std::cerr << "soapmgk verify: " << (n - failed) << "/" << n << " invariants passed\n";
  return failed ? kExitInvariant : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SOAP scheduling analysis and M/G/k simulation"};
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
  app.require_subcommand(1);

  RankOpts ro;
  auto* rank = app.add_subcommand("rank", "Tabulate rank functions and age cutoffs");
  rank->add_option("--dist", ro.dist, "Size distribution, e.g. exp(rate=1)")->required();
  rank->add_option("--policy", ro.policy, "Monotone policy for the cutoff table")->capture_default_str();
  rank->add_option("--points", ro.points, "Grid points")->capture_default_str();
  rank->add_option("--out", ro.out, "Rank table CSV (default stdout)");
  rank->add_option("--cutoffs-out", ro.cutoffs_out, "Age cutoff table CSV");

  Mg1Opts mo;
  auto* mg1 = app.add_subcommand("mg1", "Analytic M/G/1 metrics and the M/G/k bound");
  mg1->add_option("--dist", mo.dist, "Size distribution")->required();
  mg1->add_option("--policy", mo.policy, "Comma-separated monotone policies")->capture_default_str();
  mg1->add_option("--rho", mo.rho, "Comma-separated loads");
  mg1->add_option("--lambda", mo.lambda, "Comma-separated arrival rates");
  mg1->add_option("--k", mo.k, "Server count for bound_k")->capture_default_str();
  mg1->add_option("--out", mo.out, "Output CSV (default stdout)");

  SimOpts so;
  auto add_sim_opts = [](CLI::App* sub, SimOpts& s) {
    sub->add_option("--dist", s.dist, "Size distribution")->required();
    sub->add_option("--policy", s.policy, "Comma-separated policies")->capture_default_str();
    sub->add_option("--rho", s.rho, "Comma-separated loads");
    sub->add_option("--k", s.k, "Comma-separated server counts")->capture_default_str();
    sub->add_option("--n-jobs", s.n_jobs, "Jobs per run, warm-up included")->capture_default_str();
    sub->add_option("--seed", s.seed, "Random seed")->capture_default_str();
    sub->add_option("--quantum", s.quantum, "Service quantum for rank ties (0: 1e-3 E[X])");
    sub->add_option("--jobs", s.jobs, "Parallel cells (default: all cores, capped by SOAP_MGK_THREADS)");
    sub->add_option("--out", s.out, "Output CSV (default stdout)");
  };
  auto* sim = app.add_subcommand("simulate", "Simulate the k-server system");
  add_sim_opts(sim, so);
  sim->add_option("--lambda", so.lambda, "Comma-separated arrival rates");
  sim->add_option("--tag-x", so.tag_x, "Also run the coupled 1-vs-k trace for this size");

  SimOpts wo;
  wo.policy = "m-gittins,m-serpt";
  wo.k = "4";
  wo.rho = "0.8,0.9,0.95";
  auto* sweep = app.add_subcommand("sweep", "Load sweep against the single-server Gittins baseline");
  add_sim_opts(sweep, wo);

  VerifyOpts vo;
  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  verify->add_option("--dists", vo.dists, "Semicolon-separated distributions");
  verify->add_option("--rho", vo.rho, "Comma-separated loads");
  verify->add_option("--policy", vo.policy, "Comma-separated policies");
  verify->add_flag("--no-sim", vo.no_sim, "Skip the simulator invariants");
  verify->add_option("--sim-jobs", vo.sim_jobs, "Jobs per simulator check");
  verify->add_option("--seed", vo.seed, "Random seed")->capture_default_str();
  verify->add_flag("--fault", vo.fault, "Negative control: corrupt one analytic path");
  verify->add_option("--out", vo.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*rank) return cmd_rank(ro);
    if (*mg1) return cmd_mg1(mo);
    if (*sim) return cmd_simulate(so);
    if (*sweep) return cmd_sweep(wo);
    if (*verify) return cmd_verify(vo);
  } catch (const CliError& e) {
    std::cerr << "soapmgk: " << e.message << "\n";
    return e.code;
  }
  return kExitOk;
}
