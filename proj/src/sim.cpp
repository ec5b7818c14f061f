#include "soapmgk/sim.hpp"

#include "soapmgk/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

namespace soapmgk {
namespace {

constexpr int kMaxIdleSteps = 100000;

struct Job {
  std::uint64_t id;
  double size;
  double arrival;
};

struct Entity {
  double age = 0.0;
  std::vector<Job> jobs;  // sorted by id
  double min_size = kInfinity;
  bool alive = false;
};

// Waiting-pool order: rank, then "rank rises immediately if served", then
// arrival index. A job sitting where its rank is about to rise loses ties to
// one whose rank would stay put.
struct Key {
  double rank;
  bool inc;
  std::uint64_t id;
  int idx;
  bool operator<(const Key& o) const {
    return std::tie(rank, inc, id) < std::tie(o.rank, o.inc, o.id);
  }
};

struct Slot {
  int idx;
  double rate;  // per job
};

enum class EventKind { None, Complete, Cross, Split, Merge, Requeue };

struct Planned {
  EventKind kind = EventKind::None;
  int idx = -1;
  int other = -1;
  double target = 0.0;
};

constexpr std::uint64_t kMinMeasured = 10000;

bool same_age(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

class Engine {
public:
  Engine(const RankFunction* rank, int k, double quantum)
      : rank_(rank), k_(k), quantum_(quantum) {}

  double now() const { return now_; }
  std::size_t in_system() const { return in_system_; }
  double work_served() const { return work_served_; }
  double work_completed() const { return work_completed_; }

  void arrive(const Job& job) {
    const int idx = make_entity();
    Entity& e = ents_[idx];
    e.age = 0.0;
    e.jobs.assign(1, job);
    e.min_size = job.size;
    ++in_system_;
    insert(idx);
  }

  // Return served work to the pool, reallocate the servers, and find the
  // time to the next internal event.
  double plan(const DecisionObserver& observer) {
    for (const Slot& s : served_)
      if (s.idx >= 0 && ents_[s.idx].alive) insert(s.idx);
    served_.clear();
    partial_ = -1;

    int slots = k_;
    while (slots > 0 && !pool_.empty()) {
      Key key = *pool_.begin();
      pool_.erase(pool_.begin());
      Entity& e = ents_[key.idx];
      const int m = static_cast<int>(e.jobs.size());
      if (m <= slots) {
        served_.push_back({key.idx, 1.0 / k_});
        slots -= m;
      } else if (key.inc) {
        served_.push_back({key.idx, static_cast<double>(slots) / (static_cast<double>(k_) * m)});
        partial_ = static_cast<int>(served_.size()) - 1;
        slots = 0;
      } else {
        const int head = make_entity();
        Entity& rest = ents_[key.idx];
        Entity& h = ents_[head];
        h.age = rest.age;
        h.jobs.assign(rest.jobs.begin(), rest.jobs.begin() + slots);
        rest.jobs.erase(rest.jobs.begin(), rest.jobs.begin() + slots);
        refresh(h);
        refresh(rest);
        insert(key.idx);
        served_.push_back({head, 1.0 / k_});
        slots = 0;
      }
    }
    if (observer) observe(observer);

    planned_ = Planned{};
    double best_dt = kInfinity;
    auto offer = [&](double dt, Planned p) {
      if (dt < best_dt) {
        best_dt = dt;
        planned_ = p;
      }
    };
    const Key* best = pool_.empty() ? nullptr : &*pool_.begin();

    for (const Slot& s : served_) {
      const Entity& e = ents_[s.idx];
      offer(std::max(0.0, (e.min_size - e.age) / s.rate), {EventKind::Complete, s.idx, -1, e.min_size});
      if (rank_ && best) {
        const double cross = crossing_age(e, *best, s.rate);
        if (cross < kInfinity) offer((cross - e.age) / s.rate, {EventKind::Cross, s.idx, -1, cross});
      }
    }
    if (rank_ && partial_ >= 0) {
      const Slot& p = served_[partial_];
      const Entity& pe = ents_[p.idx];
      const double b = rank_->next_nonincreasing(pe.age);
      if (b < kInfinity && b > pe.age) offer((b - pe.age) / p.rate, {EventKind::Split, p.idx, -1, b});
      for (int i = 0; i < static_cast<int>(served_.size()); ++i) {
        if (i == partial_) continue;
        const Slot& s = served_[i];
        const Entity& e = ents_[s.idx];
        if (!rank_->monotone()) {
          offer(quantum_, {EventKind::Requeue, -1, -1, 0.0});
        } else if (e.age < pe.age && s.rate > p.rate) {
          offer((pe.age - e.age) / (s.rate - p.rate), {EventKind::Merge, s.idx, p.idx, 0.0});
        }
      }
    }
    return best_dt;
  }

  void advance(double dt, bool own_event) {
    for (const Slot& s : served_) {
      Entity& e = ents_[s.idx];
      set_age(e, e.age + s.rate * dt);
    }
    now_ += dt;
    if (!own_event) return;
    switch (planned_.kind) {
      case EventKind::Complete:
      case EventKind::Cross:
      case EventKind::Split:
        set_age(ents_[planned_.idx], planned_.target);
        break;
      case EventKind::Merge:
        set_age(ents_[planned_.idx], ents_[planned_.other].age);
        break;
      default: break;
    }
  }

  void set_age(Entity& e, double age) {
    const double next = std::min(age, e.min_size);
    work_served_ += (next - e.age) * static_cast<double>(e.jobs.size());
    e.age = next;
  }

  // Remove finished jobs; f(job, finish_time) for each.
  template <class F>
  void settle(F&& f) {
    for (Slot& s : served_) {
      Entity& e = ents_[s.idx];
      if (e.min_size - e.age > 1e-12 * std::max(1.0, e.min_size)) continue;
      auto done = [&](const Job& j) { return j.size - e.age <= 1e-12 * std::max(1.0, j.size); };
      for (const Job& j : e.jobs)
        if (done(j)) {
          f(j, now_);
          work_completed_ += j.size;
          --in_system_;
        }
      e.jobs.erase(std::remove_if(e.jobs.begin(), e.jobs.end(), done), e.jobs.end());
      if (e.jobs.empty()) {
        release(s.idx);
        s.idx = -1;
      } else {
        refresh(e);
      }
    }
    served_.erase(std::remove_if(served_.begin(), served_.end(), [](const Slot& s) { return s.idx < 0; }),
                  served_.end());
  }

  double work_in_progress() const {
    double w = 0.0;
    for (const Entity& e : ents_)
      if (e.alive) w += e.age * static_cast<double>(e.jobs.size());
    return w;
  }

  double relevant_work(double z) const {
    double w = 0.0;
    for (const Entity& e : ents_) {
      if (!e.alive) continue;
      for (const Job& j : e.jobs) w += std::max(0.0, std::min(z, j.size) - e.age);
    }
    return w;
  }

private:
  int make_entity() {
    int idx;
    if (!free_.empty()) {
      idx = free_.back();
      free_.pop_back();
    } else {
      idx = static_cast<int>(ents_.size());
      ents_.emplace_back();
    }
    ents_[idx].alive = true;
    ents_[idx].jobs.clear();
    return idx;
  }

  void release(int idx) {
    ents_[idx].alive = false;
    ents_[idx].jobs.clear();
    free_.push_back(idx);
  }

  static void refresh(Entity& e) {
    e.min_size = kInfinity;
    for (const Job& j : e.jobs) e.min_size = std::min(e.min_size, j.size);
  }

  Key key_of(int idx) const {
    const Entity& e = ents_[idx];
    if (!rank_) return {e.jobs[0].size - e.age, false, e.jobs[0].id, idx};
    return {(*rank_)(e.age), rank_->right_increasing(e.age), e.jobs[0].id, idx};
  }

  // Put an entity into the waiting pool, merging it with a waiting entity of
  // the same age when both would share service (rank rising there).
  void insert(int idx) {
    Key key = key_of(idx);
    if (key.inc) {
      for (auto it = pool_.lower_bound(Key{key.rank, true, 0, -1});
           it != pool_.end() && it->rank == key.rank && it->inc; ++it) {
        Entity& other = ents_[it->idx];
        if (other.age != ents_[idx].age) continue;
        Entity& mine = ents_[idx];
        std::vector<Job> merged;
        merged.reserve(other.jobs.size() + mine.jobs.size());
        std::merge(other.jobs.begin(), other.jobs.end(), mine.jobs.begin(), mine.jobs.end(),
                   std::back_inserter(merged), [](const Job& a, const Job& b) { return a.id < b.id; });
        const int keep = it->idx;
        pool_.erase(it);
        ents_[keep].jobs = std::move(merged);
        ents_[keep].min_size = std::min(ents_[keep].min_size, mine.min_size);
        release(idx);
        pool_.insert(key_of(keep));
        return;
      }
    }
    pool_.insert(key);
  }

  // Age at which a served entity stops beating the best waiting one.
  double crossing_age(const Entity& e, const Key& best, double rate) const {
    const double t = best.rank;
    const double ua = ents_[best.idx].age;
    double a1 = rank_->next_crossing(e.age, t, false);
    if (a1 == kInfinity) return kInfinity;
    // On a monotone rank a rising crossing before ua is interpolation
    // rounding; the two really meet at ua.
    const bool meet = same_age(a1, ua) ||
                      (rank_->monotone() && e.age <= ua && a1 < ua && rank_->right_increasing(a1));
    if (meet) a1 = std::max(ua, e.age);
    const bool inc1 = rank_->right_increasing(a1);
    if (meet && inc1 && best.inc) return a1;  // they merge into one cohort
    // Equal ranks rising together at different ages share by quantum.
    const double slice = quantum_ * rate;
    const bool rising_tie = inc1 && !meet;
    const std::uint64_t id = e.jobs[0].id;
    const bool loses = (inc1 && !best.inc) || (inc1 == best.inc && id > best.id);
    if (loses) return rising_tie ? std::max(a1, e.age + slice) : a1;
    const double a2 = rank_->next_crossing(a1, t, true);
    if (a2 == kInfinity) return kInfinity;
    if (rising_tie) return std::max(a2, a1 + slice);
    if (a2 > a1) return a2;
    return a1 + slice;
  }

  void observe(const DecisionObserver& observer) const {
    DecisionView v;
    v.time = now_;
    v.k = k_;
    for (const Slot& s : served_) {
      const Entity& e = ents_[s.idx];
      const double r = rank_ ? (*rank_)(e.age) : 0.0;
      for (const Job& j : e.jobs) v.served.push_back({j.id, rank_ ? r : j.size - e.age, s.rate});
    }
    if (!pool_.empty()) {
      const Key& b = *pool_.begin();
      v.best_waiting = DecisionView::Served{b.id, b.rank, 0.0};
    }
    observer(v);
  }

  const RankFunction* rank_;
  int k_;
  double quantum_;
  double now_ = 0.0;
  std::vector<Entity> ents_;
  std::vector<int> free_;
  std::set<Key> pool_;
  std::vector<Slot> served_;
  int partial_ = -1;
  Planned planned_;
  std::size_t in_system_ = 0;
  double work_served_ = 0.0;
  double work_completed_ = 0.0;
};

void validate(const SimConfig& cfg) {
  if (cfg.k < 1) fail(ErrorCode::InvalidArgument, "server count must be at least 1");
  if (!(cfg.lambda > 0.0 && std::isfinite(cfg.lambda)))
    fail(ErrorCode::InvalidArgument, "arrival rate must be positive");
  if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "warm-up fraction must lie in [0, 1)");
  if (cfg.batches < 2) fail(ErrorCode::InvalidArgument, "need at least 2 batches");
  if (cfg.size_bins < 1) fail(ErrorCode::InvalidArgument, "need at least 1 size bin");
  if (cfg.quantum < 0.0) fail(ErrorCode::InvalidArgument, "quantum must be positive");
  const double rho = cfg.lambda * cfg.dist.mean();
  if (!(rho < 1.0)) {
    std::ostringstream os;
    os << "load rho = " << rho << " is not below 1";
    fail(ErrorCode::Overload, os.str());
  }
}

class ArrivalStream {
public:
  ArrivalStream(const SizeDistribution& dist, double lambda, std::uint64_t seed)
      : dist_(dist), lambda_(lambda), gaps_(seed, 1), sizes_(seed, 2) {
    next_time_ = gaps_.exponential(lambda_);
  }
  double next_time() const { return next_time_; }
  Job pop() {
    Job j{next_id_++, dist_.sample(sizes_), next_time_};
    next_time_ += gaps_.exponential(lambda_);
    return j;
  }
  std::uint64_t issued() const { return next_id_; }

private:
  const SizeDistribution& dist_;
  double lambda_;
  Rng gaps_;
  Rng sizes_;
  double next_time_ = 0.0;
  std::uint64_t next_id_ = 0;
};

}  // namespace

std::optional<double> next_crossing_time(const RankFunction& r, double age, double waiting_rank) {
  const double a = r.next_crossing(age, waiting_rank, false);
  if (a == kInfinity) return std::nullopt;
  return a - age;
}

SimReport simulate(const SimConfig& cfg, const RankFunction* rank, const DecisionObserver& observer) {
  validate(cfg);
  std::optional<RankFunction> own;
  if (cfg.policy != Policy::SRPT && !rank) {
    own = RankFunction::build(cfg.policy, cfg.dist);
    rank = &*own;
  }
  if (cfg.policy == Policy::SRPT) rank = nullptr;

  const std::uint64_t warm = static_cast<std::uint64_t>(std::floor(cfg.n_jobs * cfg.warmup_fraction));
  if (cfg.n_jobs <= warm || cfg.n_jobs - warm < kMinMeasured)
    fail(ErrorCode::InvalidArgument, "need at least 10000 measured jobs after warm-up");
  const std::uint64_t measured = cfg.n_jobs - warm;
  const double quantum = cfg.quantum > 0.0 ? cfg.quantum : 1e-3 * cfg.dist.mean();
  const std::uint64_t cap = std::max<std::uint64_t>(100000, cfg.n_jobs / 2);

  const int nb = cfg.batches;
  std::vector<double> batch_sum(nb, 0.0);
  std::vector<double> edges{0.0};
  for (int i = 1; i < cfg.size_bins; ++i)
    edges.push_back(cfg.dist.tail_inverse(1.0 - static_cast<double>(i) / cfg.size_bins));
  edges.push_back(kInfinity);
  std::uint64_t done = 0;
  SimReport rep;
  rep.seed = cfg.seed;
  rep.bins.resize(cfg.size_bins);
  for (int i = 0; i < cfg.size_bins; ++i) {
    rep.bins[i].lo = edges[i];
    rep.bins[i].hi = edges[i + 1];
  }

  Engine eng(rank, cfg.k, quantum);
  ArrivalStream arrivals(cfg.dist, cfg.lambda, cfg.seed);
  auto record = [&](const Job& j, double finish) {
    if (j.id < warm || j.id >= cfg.n_jobs) return;
    const std::uint64_t i = j.id - warm;
    const double t = finish - j.arrival;
    batch_sum[static_cast<std::size_t>(i * nb / measured)] += t;
    auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, j.size);
    SizeBin& bin = rep.bins[static_cast<std::size_t>(it - edges.begin()) - 1];
    ++bin.count;
    bin.mean_T += t;
    ++done;
  };

  int idle = 0;
  while (done < measured) {
    const double dt_int = eng.plan(observer);
    const double dt_arr = std::max(0.0, arrivals.next_time() - eng.now());
    ++rep.events;
    if (dt_int <= dt_arr + 1e-12) {
      idle = dt_int > 0.0 ? 0 : idle + 1;
      if (idle > kMaxIdleSteps)
        fail(ErrorCode::NonConvergence, "simulator made no progress in time");
      eng.advance(dt_int, true);
      eng.settle(record);
    } else {
      idle = 0;
      eng.advance(dt_arr, false);
      eng.settle(record);
      eng.arrive(arrivals.pop());
      rep.max_queue = std::max<std::uint64_t>(rep.max_queue, eng.in_system());
      if (eng.in_system() > cap) {
        std::ostringstream os;
        os << "queue reached " << eng.in_system() << " jobs; the run is not stable";
        fail(ErrorCode::NonConvergence, os.str());
      }
    }
  }

  rep.batch_means.assign(nb, 0.0);
  double total = 0.0;
  for (int b = 0; b < nb; ++b) {
    const std::uint64_t lo = (measured * b + nb - 1) / nb;
    const std::uint64_t hi = (measured * (b + 1) + nb - 1) / nb;
    rep.batch_means[b] = batch_sum[b] / static_cast<double>(hi - lo);
    total += batch_sum[b];
  }
  rep.mean_T = total / static_cast<double>(measured);
  double var = 0.0;
  for (double m : rep.batch_means) var += (m - rep.mean_T) * (m - rep.mean_T);
  var /= nb - 1;
  boost::math::students_t tdist(nb - 1);
  rep.ci_half = boost::math::quantile(boost::math::complement(tdist, 0.025)) * std::sqrt(var / nb);

  for (SizeBin& bin : rep.bins)
    if (bin.count) bin.mean_T /= static_cast<double>(bin.count);

  rep.measured = measured;
  rep.throughput = static_cast<double>(arrivals.issued()) / std::max(eng.now(), 1e-300);
  rep.work_served = eng.work_served();
  rep.work_completed = eng.work_completed();
  rep.work_in_progress = eng.work_in_progress();
  return rep;
}

CoupledTrace simulate_coupled(const SimConfig& cfg, double x, const RankFunction* rank) {
  validate(cfg);
  if (cfg.policy == Policy::SRPT || !policy_is_monotone(cfg.policy))
    fail(ErrorCode::Unsupported,
         std::string("coupled runs need a monotone SOAP policy, got ") + policy_name(cfg.policy));
  std::optional<RankFunction> own;
  if (!rank) {
    own = RankFunction::build(cfg.policy, cfg.dist);
    rank = &*own;
  }
  if (!rank->monotone()) fail(ErrorCode::Unsupported, "coupled runs need a monotone rank function");
  CoupledTrace tr;
  tr.x = x;
  tr.z = rank->cutoffs(x).z;
  if (tr.z == kInfinity)
    fail(ErrorCode::NotApplicable, "relevant-work coupling needs a finite old-job cutoff");
  tr.bound = (cfg.k - 1) * tr.z;
  const double quantum = cfg.quantum > 0.0 ? cfg.quantum : 1e-3 * cfg.dist.mean();

  Engine one(rank, 1, quantum);
  Engine many(rank, cfg.k, quantum);
  ArrivalStream arrivals(cfg.dist, cfg.lambda, cfg.seed);
  auto ignore = [](const Job&, double) {};
  int idle = 0;
  while (arrivals.issued() < cfg.n_jobs) {
    const double d1 = one.plan({});
    const double dk = many.plan({});
    const double da = std::max(0.0, arrivals.next_time() - one.now());
    const double dt = std::min({d1, dk, da});
    const bool internal = std::min(d1, dk) <= da + 1e-12;
    const double step = internal ? std::min(d1, dk) : da;
    idle = (internal && step <= 0.0) ? idle + 1 : 0;
    if (idle > kMaxIdleSteps) fail(ErrorCode::NonConvergence, "simulator made no progress in time");
    one.advance(step, internal && d1 == step);
    many.advance(step, internal && dk == step);
    one.settle(ignore);
    many.settle(ignore);
    if (!internal) {
      const Job j = arrivals.pop();
      one.arrive(j);
      many.arrive(j);
    }
    (void)dt;
    ++tr.events;
    const double delta = many.relevant_work(tr.z) - one.relevant_work(tr.z);
    tr.max_delta = std::max(tr.max_delta, delta);
    if (delta > tr.bound + 1e-9) ++tr.violations;
  }
  return tr;
}

}  // namespace soapmgk
