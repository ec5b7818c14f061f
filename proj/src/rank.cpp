#include "soapmgk/rank.hpp"

#include "soapmgk/error.hpp"
#include "soapmgk/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace soapmgk {
namespace {

constexpr std::size_t kGridPoints = 4096;
constexpr std::size_t kPilotPoints = 1536;
constexpr std::size_t kMaxExtraPerInterval = 16;
constexpr std::size_t kGittinsCandidates = 512;
constexpr double kSnap = 1e-13;

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

std::vector<double> rank_grid(const SizeDistribution& dist, std::size_t points) {
  const double hi = dist.truncation_horizon();
  double scale = dist.mean();
  for (double b : dist.breakpoints())
    if (b > 0.0) scale = std::min(scale, b);
  const double lo = std::min(scale * 1e-6, hi * 1e-6);
  // A quarter of the nodes cover the small ages, the rest the bulk of the mass.
  const double mid = std::max({lo, scale * 1e-2, dist.support_inf()});
  std::vector<double> grid = numerics::build_log_grid(lo, hi, points / 4);
  std::vector<double> dense = numerics::build_log_grid(mid, hi, points - points / 4 - 1);
  grid.insert(grid.end(), dense.begin(), dense.end());
  grid.push_back(0.0);
  for (double b : dist.breakpoints())
    if (b > 0.0 && b <= hi) grid.push_back(b);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// Tabulates base on a pilot grid, then spends the rest of the node budget
// where the chord through neighbouring nodes misses the most, so that the
// linear interpolation error is roughly even across the table.
RankFunction tabulate(Policy policy, const SizeDistribution& dist,
                      double (*base)(const SizeDistribution&, double)) {
  const std::vector<double> pilot = rank_grid(dist, kPilotPoints);
  const std::size_t m = pilot.size();
  std::vector<double> pv(m);
  for (std::size_t i = 0; i < m; ++i) pv[i] = base(dist, pilot[i]);

  std::vector<double> bend(m, 0.0);
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double w = (pilot[i] - pilot[i - 1]) / (pilot[i + 1] - pilot[i - 1]);
    const double chord = pv[i - 1] + w * (pv[i + 1] - pv[i - 1]);
    bend[i] = std::abs(pv[i] - chord) / std::max(std::abs(pv[i]), 1e-300);
  }
  std::vector<double> weight(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) weight[i] = std::sqrt(std::max(bend[i], bend[i + 1]));
  // Proportional shares, capped per interval (kinks do not improve with
  // refinement); what the capped intervals cannot use goes to the others.
  std::vector<std::size_t> extra(m - 1, 0);
  std::vector<bool> capped(m - 1, false);
  std::size_t budget = kGridPoints > m ? kGridPoints - m : 0;
  for (int round = 0; round < 8 && budget > 0; ++round) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i)
      if (!capped[i]) total += weight[i];
    if (!(total > 0.0)) break;
    std::size_t used = 0;
    bool any_capped = false;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      if (capped[i]) continue;
      std::size_t share = static_cast<std::size_t>(std::floor(budget * weight[i] / total));
      if (extra[i] + share >= kMaxExtraPerInterval) {
        share = kMaxExtraPerInterval - extra[i];
        capped[i] = true;
        any_capped = true;
      }
      extra[i] += share;
      used += share;
    }
    budget -= std::min(used, budget);
    if (!any_capped) break;
  }
  std::vector<double> ages;
  std::vector<double> ranks;
  ages.reserve(kGridPoints + m);
  ranks.reserve(kGridPoints + m);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    ages.push_back(pilot[i]);
    ranks.push_back(pv[i]);
    for (std::size_t j = 1; j <= extra[i]; ++j) {
      const double a =
          pilot[i] + (pilot[i + 1] - pilot[i]) * static_cast<double>(j) / (extra[i] + 1);
      if (!(a > ages.back() && a < pilot[i + 1])) continue;
      ages.push_back(a);
      ranks.push_back(base(dist, a));
    }
  }
  ages.push_back(pilot[m - 1]);
  ranks.push_back(pv[m - 1]);
  for (std::size_t i = 1; i < ranks.size(); ++i)
    if (close_rel(ranks[i], ranks[i - 1], kSnap)) ranks[i] = ranks[i - 1];
  return RankFunction::from_points(std::move(ages), std::move(ranks), policy, dist.support_sup());
}

}  // namespace

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::FCFS: return "fcfs";
    case Policy::FB: return "fb";
    case Policy::SERPT: return "serpt";
    case Policy::MSERPT: return "m-serpt";
    case Policy::Gittins: return "gittins";
    case Policy::MGittins: return "m-gittins";
    case Policy::SRPT: return "srpt";
  }
  return "unknown";
}

Policy parse_policy(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Policy p : {Policy::FCFS, Policy::FB, Policy::SERPT, Policy::MSERPT, Policy::Gittins,
                   Policy::MGittins, Policy::SRPT})
    if (n == policy_name(p)) return p;
  if (n == "mserpt") return Policy::MSERPT;
  if (n == "mgittins") return Policy::MGittins;
  fail(ErrorCode::ParseError, "unknown policy '" + name + "'");
}

bool policy_is_monotone(Policy p) {
  return p == Policy::FCFS || p == Policy::FB || p == Policy::MSERPT || p == Policy::MGittins;
}

// ---- eta and the base ranks --------------------------------------------------

double eta(const SizeDistribution& dist, double a, double b) {
  if (!(a >= 0.0 && b >= a)) fail(ErrorCode::InvalidArgument, "eta needs 0 <= a <= b");
  if (b == a) return 1.0 / dist.hazard(a);
  if (b == kInfinity) return serpt_rank(dist, a);
  const double drop = dist.tail_drop(a, b);
  if (!(drop > 0.0)) {
    std::ostringstream os;
    os << "no completions between ages " << a << " and " << b;
    fail(ErrorCode::Degenerate, os.str());
  }
  return dist.integrated_tail(a, b) / drop;
}

double serpt_rank(const SizeDistribution& dist, double a) {
  if (a >= dist.support_sup()) return 0.0;
  const double t = dist.tail(a);
  if (!(t > 0.0)) {
    std::ostringstream os;
    os << "tail vanishes numerically at age " << a;
    fail(ErrorCode::Degenerate, os.str());
  }
  return dist.integrated_tail(a) / t;
}

double gittins_rank(const SizeDistribution& dist, double a) {
  if (dist.has_atoms())
    fail(ErrorCode::UnsupportedPoint, "Gittins rank needs a distribution without atoms");
  if (a >= dist.support_sup()) return 0.0;
  double best = serpt_rank(dist, a);
  const double h = dist.hazard_or_limit(a);
  if (h > 0.0) best = std::min(best, 1.0 / h);

  const double upper = dist.bounded() ? dist.support_sup() : dist.truncation_horizon();
  const double lo = a > 0.0 ? a * (1.0 + 1e-6) : 1e-6 * dist.mean();
  if (!(lo < upper)) return best;

  auto eta_or_inf = [&](double b) {
    const double drop = dist.tail_drop(a, b);
    return drop > 0.0 ? dist.integrated_tail(a, b) / drop : kInfinity;
  };
  std::vector<double> cands = numerics::build_log_grid(lo, upper, kGittinsCandidates);
  std::size_t arg = 0;
  double grid_min = kInfinity;
  for (std::size_t j = 0; j < cands.size(); ++j) {
    const double v = eta_or_inf(cands[j]);
    if (v < grid_min) {
      grid_min = v;
      arg = j;
    }
  }
  if (!(grid_min < kInfinity)) return best;
  const double left = std::log(arg > 0 ? cands[arg - 1] : lo);
  const double right = std::log(arg + 1 < cands.size() ? cands[arg + 1] : upper);
  const double u = numerics::golden_section_min(
      [&](double s) { return eta_or_inf(std::exp(s)); }, left, right, 1e-8);
  return std::min({best, grid_min, eta_or_inf(std::exp(u))});
}

// ---- RankFunction ------------------------------------------------------------

RankFunction RankFunction::from_points(std::vector<double> ages, std::vector<double> ranks,
                                       Policy tag, double support_sup) {
  if (ages.empty() || ages.size() != ranks.size())
    fail(ErrorCode::InvalidArgument, "rank table needs matching nonempty columns");
  for (std::size_t i = 1; i < ages.size(); ++i)
    if (!(ages[i] > ages[i - 1]))
      fail(ErrorCode::InvalidArgument, "rank table ages must be strictly increasing");
  for (double r : ranks)
    if (!std::isfinite(r)) fail(ErrorCode::InvalidArgument, "rank values must be finite");
  RankFunction f;
  f.policy_ = tag;
  f.support_sup_ = support_sup;
  f.ages_ = std::move(ages);
  f.ranks_ = std::move(ranks);
  f.finalize();
  return f;
}

void RankFunction::finalize() {
  const std::size_t n = ages_.size();
  monotone_ = true;
  for (std::size_t i = 1; i < n; ++i)
    if (ranks_[i] < ranks_[i - 1]) monotone_ = false;
  tail_slope_ = 0.0;
  if (n >= 2) {
    const double s = (ranks_[n - 1] - ranks_[n - 2]) / (ages_[n - 1] - ages_[n - 2]);
    if (s > 0.0) tail_slope_ = s;
  }

  leaves_ = 1;
  while (leaves_ < n) leaves_ *= 2;
  tree_.assign(2 * leaves_, -kInfinity);
  for (std::size_t i = 0; i < n; ++i) tree_[leaves_ + i] = ranks_[i];
  for (std::size_t i = leaves_ - 1; i >= 1; --i) tree_[i] = std::max(tree_[2 * i], tree_[2 * i + 1]);

  // nonincr_from_[i]: first segment j >= i (segment j joins nodes j and j+1)
  // that does not increase; n - 1 stands for the extension past the table.
  run_start_.assign(n, 0);
  run_end_.assign(n, n - 1);
  for (std::size_t i = 1; i < n; ++i)
    run_start_[i] = ranks_[i] == ranks_[i - 1] ? run_start_[i - 1] : i;
  for (std::size_t i = n - 1; i-- > 0;)
    run_end_[i] = ranks_[i + 1] == ranks_[i] ? run_end_[i + 1] : i;

  nonincr_from_.assign(n, n - 1);
  for (std::size_t i = n - 1; i-- > 0;)
    nonincr_from_[i] = ranks_[i + 1] <= ranks_[i] ? i : nonincr_from_[i + 1];
}

RankFunction RankFunction::build(Policy policy, const SizeDistribution& dist) {
  switch (policy) {
    case Policy::FCFS: return from_points({0.0, 1.0}, {0.0, 0.0}, policy, dist.support_sup());
    case Policy::FB: return from_points({0.0, 1.0}, {0.0, 1.0}, policy, dist.support_sup());
    case Policy::SERPT: return tabulate(policy, dist, &serpt_rank);
    case Policy::Gittins:
      if (dist.has_atoms())
        fail(ErrorCode::UnsupportedPoint, "Gittins rank needs a distribution without atoms");
      return tabulate(policy, dist, &gittins_rank);
    case Policy::MSERPT: {
      RankFunction env = monotone_envelope(tabulate(Policy::SERPT, dist, &serpt_rank),
                                           [&dist](double a) { return serpt_rank(dist, a); });
      env.policy_ = policy;
      return env;
    }
    case Policy::MGittins: {
      if (dist.has_atoms())
        fail(ErrorCode::UnsupportedPoint, "Gittins rank needs a distribution without atoms");
      RankFunction env = monotone_envelope(tabulate(Policy::Gittins, dist, &gittins_rank),
                                           [&dist](double a) { return gittins_rank(dist, a); });
      env.policy_ = policy;
      return env;
    }
    case Policy::SRPT: break;
  }
  fail(ErrorCode::Unsupported, "SRPT has no age-based rank function");
}

std::size_t RankFunction::segment_of(double a) const {
  auto it = std::upper_bound(ages_.begin(), ages_.end(), a);
  if (it == ages_.begin()) return 0;
  return static_cast<std::size_t>(it - ages_.begin()) - 1;
}

double RankFunction::operator()(double a) const {
  const std::size_t n = ages_.size();
  if (a <= ages_[0]) return ranks_[0];
  if (a >= ages_[n - 1]) return ranks_[n - 1] + tail_slope_ * (a - ages_[n - 1]);
  const std::size_t s = segment_of(a);
  const double w = (a - ages_[s]) / (ages_[s + 1] - ages_[s]);
  return ranks_[s] + w * (ranks_[s + 1] - ranks_[s]);
}

bool RankFunction::right_increasing(double a) const {
  const std::size_t n = ages_.size();
  if (a >= ages_[n - 1]) return tail_slope_ > 0.0;
  const std::size_t s = a < ages_[0] ? 0 : segment_of(a);
  return ranks_[s + 1] > ranks_[s];
}

long RankFunction::first_node_at_least(std::size_t from, double t, bool strict) const {
  auto ok = [&](double v) { return strict ? v > t : v >= t; };
  // Iterative descent: climb while the current subtree cannot contain the answer.
  std::size_t node = leaves_ + from;
  if (from >= ages_.size()) return -1;
  if (ok(tree_[node])) return static_cast<long>(from);
  for (;;) {
    // Move to the next subtree to the right.
    while (node & 1) {
      node >>= 1;
      if (node == 0) return -1;
    }
    if (node == 0) return -1;
    ++node;
    if (ok(tree_[node])) break;
  }
  while (node < leaves_) {
    node = ok(tree_[2 * node]) ? 2 * node : 2 * node + 1;
  }
  const std::size_t idx = node - leaves_;
  return idx < ages_.size() ? static_cast<long>(idx) : -1;
}

double RankFunction::next_crossing(double a, double t, bool strict) const {
  const double ra = (*this)(a);
  if (strict ? ra > t : ra >= t) return a;
  const std::size_t n = ages_.size();
  if (a < ages_[n - 1]) {
    const std::size_t s = a < ages_[0] ? 0 : segment_of(a);
    const long j = first_node_at_least(s + 1, t, strict);
    if (j >= 0) {
      const std::size_t k = static_cast<std::size_t>(j);
      const double v0 = ranks_[k - 1];
      const double v1 = ranks_[k];
      if (t == v1 && !strict) return std::max(a, ages_[k]);
      double b = std::clamp(ages_[k - 1] + (t - v0) / (v1 - v0) * (ages_[k] - ages_[k - 1]), a, ages_[k]);
      // Rounding may leave the interpolated rank just short of t; step forward
      // so that evaluation at the returned age agrees with the crossing.
      for (int i = 0; i < 64 && b < ages_[k]; ++i) {
        const double rb = (*this)(b);
        if (strict ? rb > t : rb >= t) break;
        b = std::nextafter(b, kInfinity);
      }
      return b;
    }
  }
  if (!(tail_slope_ > 0.0)) return kInfinity;
  const double base = std::max(a, ages_[n - 1]);
  const double rb = ranks_[n - 1] + tail_slope_ * (base - ages_[n - 1]);
  return base + std::max(0.0, (t - rb) / tail_slope_);
}

double RankFunction::next_nonincreasing(double a) const {
  const std::size_t n = ages_.size();
  if (a >= ages_[n - 1]) return tail_slope_ > 0.0 ? kInfinity : a;
  const std::size_t s = a < ages_[0] ? 0 : segment_of(a);
  const std::size_t j = nonincr_from_[s];
  if (j == n - 1) return tail_slope_ > 0.0 ? kInfinity : ages_[n - 1];
  return std::max(a, ages_[j]);
}

AgeCutoffs RankFunction::cutoffs(double x) const {
  if (!monotone_) fail(ErrorCode::NotApplicable, "age cutoffs need a monotone rank function");
  if (!(x >= 0.0)) fail(ErrorCode::InvalidArgument, "cutoffs need a nonnegative size");
  // Level sets of a monotone piecewise-linear function are single points
  // except on runs of equal node values, so scan the runs directly.
  const std::size_t n = ages_.size();
  AgeCutoffs c{x, x, x};
  if (x >= ages_[n - 1]) {
    if (x == ages_[n - 1] || tail_slope_ == 0.0) c.y = std::min(x, ages_[run_start_[n - 1]]);
    if (tail_slope_ == 0.0) c.z = kInfinity;
  } else if (x <= ages_[0]) {
    c.z = ranks_[1] == ranks_[0] ? run_end_age(0) : x;
  } else {
    const std::size_t s = segment_of(x);
    if (ranks_[s + 1] == ranks_[s]) {
      c.y = ages_[run_start_[s]];
      c.z = run_end_age(s + 1);
    } else if (x == ages_[s]) {
      c.y = ages_[run_start_[s]];
    }
  }
  if (c.z > support_sup_) c.z = std::max(support_sup_, x);
  return c;
}

double RankFunction::run_end_age(std::size_t i) const {
  const std::size_t j = run_end_[i];
  if (j == ages_.size() - 1 && tail_slope_ == 0.0) return kInfinity;
  return ages_[j];
}

// ---- envelope ----------------------------------------------------------------

RankFunction monotone_envelope(const RankFunction& base,
                               const std::function<double(double)>& exact) {
  const auto& a = base.ages_;
  const auto& b = base.ranks_;
  const std::size_t n = a.size();
  std::vector<double> oa{a[0]};
  std::vector<double> ob{b[0]};
  double level = b[0];
  std::size_t i = 1;
  bool flat_to_end = false;

  while (i < n) {
    if (b[i] >= level) {
      oa.push_back(a[i]);
      ob.push_back(b[i]);
      level = b[i];
      ++i;
      continue;
    }
    // Base drops below the running max: the max sits at node i - 1.
    if (exact && i >= 2 && b[i - 1] > b[i - 2]) {
      const double lo = std::max(a[i - 2], oa.size() >= 2 ? oa[oa.size() - 2] : a[i - 2]);
      const double hi = a[i];
      const double u = numerics::golden_section_min([&](double s) { return -exact(s); }, lo, hi,
                                                    1e-12);
      const double mu = exact(u);
      if (mu > level && u > lo && u < hi) {
        oa.back() = u;
        ob.back() = mu;
        level = mu;
      }
    }
    const double thresh = level + kSnap * std::abs(level);
    std::size_t j = i;
    while (j < n && !(b[j] > thresh)) ++j;
    if (j == n) {
      flat_to_end = true;
      break;
    }
    double v;
    const double lin = a[j - 1] + (level - b[j - 1]) / (b[j] - b[j - 1]) * (a[j] - a[j - 1]);
    v = std::clamp(lin, a[j - 1], a[j]);
    if (exact) {
      try {
        v = numerics::bisect_monotone([&](double s) { return -exact(s); }, -level, a[j - 1], a[j],
                                      1e-14 * a[j]);
      } catch (const Error&) {
        // Exact base does not bracket the level here; keep the grid value.
      }
    }
    if (v > oa.back()) {
      oa.push_back(v);
      ob.push_back(level);
    }
    if (a[j] > oa.back()) {
      oa.push_back(a[j]);
      ob.push_back(std::max(b[j], level));
      level = ob.back();
    }
    i = j + 1;
  }
  if (flat_to_end && a[n - 1] > oa.back()) {
    oa.push_back(a[n - 1]);
    ob.push_back(level);
  }
  if (oa.size() == 1) {
    oa.push_back(oa[0] + 1.0);
    ob.push_back(ob[0]);
  }
  RankFunction out = RankFunction::from_points(std::move(oa), std::move(ob), base.policy_,
                                               base.support_sup_);
  if (flat_to_end) out.tail_slope_ = 0.0;
  return out;
}

double peak_age(const SizeDistribution& dist) {
  const ClassSet& cls = dist.declared_classes();
  if (!cls.has(DistClass::ENBUE) && !cls.has(DistClass::Bounded))
    fail(ErrorCode::NotApplicable, "peak age needs a declared ENBUE or Bounded distribution");
  RankFunction r = tabulate(Policy::SERPT, dist, &serpt_rank);
  const auto& ranks = r.ranks();
  const double top = *std::max_element(ranks.begin(), ranks.end());
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (ranks[i] >= top - kSnap * std::abs(top)) return r.ages()[i];
  return 0.0;
}

CutoffGrowthReport cutoff_growth_diagnostic(const RankFunction& r, const SizeDistribution& dist,
                                            const std::vector<double>& sizes) {
  CutoffGrowthReport rep;
  const ClassSet& cls = dist.declared_classes();
  if (const ClassDecl* d = cls.find(DistClass::OR); d && d->p1 > 1.0) {
    rep.mode = CutoffGrowthReport::Mode::OR;
  } else if (const ClassDecl* q = cls.find(DistClass::QDHR)) {
    rep.mode = CutoffGrowthReport::Mode::QDHR;
    rep.gamma = q->p1;
  } else if (const ClassDecl* m = cls.find(DistClass::QIMRL)) {
    rep.mode = CutoffGrowthReport::Mode::QIMRL;
    rep.gamma = m->p1;
  }
  const bool gamma_mode = rep.mode == CutoffGrowthReport::Mode::QDHR ||
                          rep.mode == CutoffGrowthReport::Mode::QIMRL;
  rep.min_upper = rep.min_lower = kInfinity;
  rep.max_upper = rep.max_lower = -kInfinity;
  for (double x : sizes) {
    if (!(x > 0.0)) fail(ErrorCode::InvalidArgument, "diagnostic sizes must be positive");
    AgeCutoffs c = r.cutoffs(x);
    CutoffGrowthRow row{x, c.y, c.z, 0.0, std::nan("")};
    if (gamma_mode) {
      row.upper = c.z / std::pow(x, rep.gamma);
      row.lower = std::pow(c.y, rep.gamma) / x;
      rep.min_lower = std::min(rep.min_lower, row.lower);
      rep.max_lower = std::max(rep.max_lower, row.lower);
    } else {
      row.upper = c.z / x;
    }
    rep.min_upper = std::min(rep.min_upper, row.upper);
    rep.max_upper = std::max(rep.max_upper, row.upper);
    rep.rows.push_back(row);
  }
  if (!gamma_mode) rep.min_lower = rep.max_lower = std::nan("");
  return rep;
}

}  // namespace soapmgk
