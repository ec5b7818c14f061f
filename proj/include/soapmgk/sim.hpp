#pragma once

#include "soapmgk/distribution.hpp"
#include "soapmgk/rank.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace soapmgk {

struct SimConfig {
  SizeDistribution dist = SizeDistribution::exponential(1.0);
  double lambda = 0.5;
  int k = 1;
  Policy policy = Policy::FCFS;
  std::uint64_t n_jobs = 100000;  // warm-up plus measured arrivals
  double warmup_fraction = 0.2;
  std::uint64_t seed = 1;
  double quantum = 0.0;  // 0 means 1e-3 E[X]
  int batches = 20;
  int size_bins = 10;
};

struct SizeBin {
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t count = 0;
  double mean_T = 0.0;
};

struct SimReport {
  double mean_T = 0.0;
  double ci_half = 0.0;  // 95% batch-means half-width
  std::vector<double> batch_means;
  std::vector<SizeBin> bins;
  double throughput = 0.0;
  std::uint64_t max_queue = 0;
  std::uint64_t measured = 0;
  std::uint64_t events = 0;
  std::uint64_t seed = 0;
  double work_served = 0.0;     // total service delivered
  double work_completed = 0.0;  // total size of departed jobs
  double work_in_progress = 0.0;  // service given to jobs still present
};

struct CoupledTrace {
  double x = 0.0;
  double z = 0.0;
  double bound = 0.0;  // (k - 1) z
  double max_delta = 0.0;
  std::uint64_t events = 0;
  std::uint64_t violations = 0;  // events with delta > bound + 1e-9
};

/// Observer hook called at every decision event with the served entities'
/// job ids (for invariant checks in tests). Optional.
struct DecisionView {
  double time;
  int k;
  // For each job in service: arrival index, rank, per-job rate.
  struct Served {
    std::uint64_t id;
    double rank;
    double rate;
  };
  std::vector<Served> served;
  // Best waiting job (lowest rank, then earliest arrival), if any.
  std::optional<Served> best_waiting;
};
using DecisionObserver = std::function<void(const DecisionView&)>;

/// Simulate the k-server system under a SOAP policy. rank may be supplied to
/// avoid rebuilding it; it is ignored for SRPT.
SimReport simulate(const SimConfig& cfg, const RankFunction* rank = nullptr,
                   const DecisionObserver& observer = {});

/// Run the 1-server and k-server systems on one arrival stream and track the
/// difference in relevant work for a tagged size x.
CoupledTrace simulate_coupled(const SimConfig& cfg, double x, const RankFunction* rank = nullptr);

/// Service needed from age for the rank to reach waiting_rank; nullopt if never.
std::optional<double> next_crossing_time(const RankFunction& r, double age, double waiting_rank);

}  // namespace soapmgk
