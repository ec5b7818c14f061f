#include "soapmgk/mg1.hpp"

#include "soapmgk/error.hpp"
#include "soapmgk/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace soapmgk {
namespace {

numerics::QuadratureOptions quad_options() {
  numerics::QuadratureOptions opt;
  opt.abs_tol = 1e-12;
  opt.rel_tol = 1e-11;
  return opt;
}

void require_analyzable(const RankFunction& r, const SizeDistribution& dist) {
  if (!r.monotone())
    fail(ErrorCode::NotApplicable,
         std::string("analytic metrics need a monotone rank function, got ") +
             policy_name(r.policy()));
  if (dist.has_atoms())
    fail(ErrorCode::UnsupportedPoint, "analytic metrics need a distribution without atoms");
}

// Ages where the cutoff maps y(x), z(x) change form: ends of flat stretches.
std::vector<double> flat_ends(const RankFunction& r) {
  std::vector<double> out;
  const auto& a = r.ages();
  const auto& v = r.ranks();
  for (std::size_t i = 1; i < a.size(); ++i)
    if (v[i] == v[i - 1]) {
      out.push_back(a[i - 1]);
      out.push_back(a[i]);
    }
  return out;
}

// z(x) is infinite for every large x: the last flat stretch never ends.
bool unbounded_flat_tail(const RankFunction& r, const SizeDistribution& dist) {
  if (dist.bounded()) return false;
  return r.cutoffs(std::max(dist.truncation_horizon(), r.ages().back())).z == kInfinity;
}

// Integral of g(x) dF(x) computed as the integral of g(Fbar^{-1}(u)) over u in (0, 1).
double integrate_dF(const SizeDistribution& dist, const RankFunction& r,
                    const std::function<double(double)>& g) {
  std::vector<double> cuts;
  for (double p : flat_ends(r)) cuts.push_back(dist.tail(p));
  for (double p : dist.breakpoints()) cuts.push_back(dist.tail(p));
  for (double u = 0.1; u > 1e-300; u *= 0.1) cuts.push_back(u);
  auto f = [&](double u) {
    if (!(u > 0.0) || u >= 1.0) return 0.0;
    return g(dist.tail_inverse(u));
  };
  return numerics::integrate_pieces(f, 0.0, 1.0, cuts, quad_options()).value;
}

// Integral of g(x) dx over [0, sup] (or [0, inf) for unbounded support).
double integrate_dx(const SizeDistribution& dist, const RankFunction& r,
                    const std::function<double(double)>& g) {
  const double end = dist.bounded() ? dist.support_sup() : dist.truncation_horizon();
  std::vector<double> cuts = flat_ends(r);
  for (double p : dist.breakpoints()) cuts.push_back(p);
  const double first = std::max(end * 1e-12, 1e-3 * std::min(dist.mean(), end));
  for (double p = first; p < end; p *= 10.0) cuts.push_back(p);
  double total = numerics::integrate_pieces(g, 0.0, end, cuts, quad_options()).value;
  if (!dist.bounded()) total += numerics::integrate_adaptive(g, end, kInfinity, quad_options()).value;
  return total;
}

struct Point {
  double x, y, z;
  double Fx, Fy, Fz;  // tails
  double cx, cy, cz;  // coloads
  double tz;          // tau(z)
};

Point point_at(const RankFunction& r, const SizeDistribution& dist, const LoadProfile& lp,
               double x) {
  AgeCutoffs c = r.cutoffs(x);
  Point p{x, c.y, c.z, dist.tail(x), dist.tail(c.y), 0.0, lp.coload(x), lp.coload(c.y), 0.0, 0.0};
  if (c.z == kInfinity) {
    p.Fz = 0.0;
    p.cz = 1.0 - lp.rho();
    p.tz = lp.tau(kInfinity);
  } else {
    p.Fz = dist.tail(c.z);
    p.cz = lp.coload(c.z);
    p.tz = lp.tau(c.z);
  }
  return p;
}

// z Fbar(z), with the limit 0 at z = inf (finite mean).
double z_tail(const Point& p) { return p.z == kInfinity ? 0.0 : p.z * p.Fz; }

}  // namespace

LoadProfile::LoadProfile(const SizeDistribution& dist, double lambda)
    : dist_(&dist), lambda_(lambda), rho_(lambda * dist.mean()) {
  if (!(lambda > 0.0 && std::isfinite(lambda)))
    fail(ErrorCode::InvalidArgument, "arrival rate must be positive");
  if (!(rho_ < 1.0)) {
    std::ostringstream os;
    os << "load rho = " << rho_ << " is not below 1";
    fail(ErrorCode::Overload, os.str());
  }
}

double LoadProfile::coload(double a) const {
  if (a == kInfinity) return 1.0 - rho_;
  return 1.0 - lambda_ * dist_->truncated_moments(a).m1;
}

double LoadProfile::tau(double a) const {
  return 0.5 * lambda_ * dist_->truncated_moments(a).m2;
}

Mg1Metrics mg1_metrics(const RankFunction& r, const SizeDistribution& dist, double lambda) {
  require_analyzable(r, dist);
  LoadProfile lp(dist, lambda);
  const bool inf_tail = unbounded_flat_tail(r, dist);
  Mg1Metrics m;
  if (inf_tail && !std::isfinite(lp.tau(kInfinity))) {
    m.Q = kInfinity;
  } else {
    m.Q = integrate_dF(dist, r, [&](double x) {
      Point p = point_at(r, dist, lp, x);
      return p.tz / (p.cy * p.cz);
    });
  }
  m.R = integrate_dF(dist, r, [&](double x) {
    Point p = point_at(r, dist, lp, x);
    return x / p.cy;
  });
  if (inf_tail) {
    m.S = kInfinity;
  } else {
    m.S = integrate_dF(dist, r, [&](double x) {
      Point p = point_at(r, dist, lp, x);
      return p.z / p.cy;
    });
  }
  m.T = m.Q + m.R;
  return m;
}

KeyQuantities key_quantities(const RankFunction& r, const SizeDistribution& dist, double lambda) {
  require_analyzable(r, dist);
  LoadProfile lp(dist, lambda);
  const double lam = lp.lambda();
  const bool inf_tail = unbounded_flat_tail(r, dist);
  KeyQuantities k;
  if (inf_tail && !std::isfinite(lp.tau(kInfinity))) {
    k.Qa = kInfinity;
  } else {
    k.Qa = integrate_dx(dist, r, [&](double x) {
      Point p = point_at(r, dist, lp, x);
      if (p.Fx == 0.0) return 0.0;
      const double hy = p.Fy / p.cy;
      const double hz = p.Fz / p.cz;
      return (hy + hz) * lam * p.tz * p.Fx / (p.cx * p.cx);
    });
  }
  k.Qb = integrate_dx(dist, r, [&](double x) {
    Point p = point_at(r, dist, lp, x);
    if (p.Fx == 0.0) return 0.0;
    return lam * x * p.Fy * p.Fx / (p.cy * p.cy);
  });
  k.Rb = integrate_dx(dist, r, [&](double x) {
    Point p = point_at(r, dist, lp, x);
    if (p.Fx == 0.0) return 0.0;
    return lam * z_tail(p) * p.Fx / (p.cy * p.cz);
  });
  k.Rc = integrate_dx(dist, r, [&](double x) {
    Point p = point_at(r, dist, lp, x);
    return p.Fx / p.cy;
  });
  k.Sb = k.Rb;
  if (inf_tail) {
    k.Sc = kInfinity;
  } else {
    k.Sc = integrate_dx(dist, r, [&](double x) {
      Point p = point_at(r, dist, lp, x);
      return p.Fy / p.cy;
    });
  }
  return k;
}

Mg1Metrics mg1_metrics_alt(const RankFunction& r, const SizeDistribution& dist, double lambda,
                           bool fault_injection) {
  require_analyzable(r, dist);
  LoadProfile lp(dist, lambda);
  const double lam = lp.lambda();
  const double sign = fault_injection ? -1.0 : 1.0;
  const bool inf_tail = unbounded_flat_tail(r, dist);
  Mg1Metrics m;
  if (inf_tail && !std::isfinite(lp.tau(kInfinity))) {
    m.Q = kInfinity;
  } else {
    m.Q = integrate_dx(dist, r, [&](double x) {
      Point p = point_at(r, dist, lp, x);
      if (p.Fx == 0.0) return 0.0;
      const double lead = (p.Fy / p.cy + p.Fz / p.cz) * lam * p.tz * p.Fx / (p.cx * p.cx);
      return lead + sign * lam * x * p.Fy * p.Fx / (p.cy * p.cy);
    });
  }
  m.R = integrate_dx(dist, r, [&](double x) {
    Point p = point_at(r, dist, lp, x);
    if (p.Fx == 0.0) return 0.0;
    return lam * z_tail(p) * p.Fx / (p.cy * p.cz) + p.Fx / p.cy;
  });
  if (inf_tail) {
    m.S = kInfinity;
  } else {
    m.S = integrate_dx(dist, r, [&](double x) {
      Point p = point_at(r, dist, lp, x);
      return lam * z_tail(p) * p.Fx / (p.cy * p.cz) + p.Fy / p.cy;
    });
  }
  m.T = m.Q + m.R;
  return m;
}

double mgk_bound_at(const RankFunction& r, const SizeDistribution& dist, double lambda, int k,
                    double x) {
  require_analyzable(r, dist);
  if (k < 1) fail(ErrorCode::InvalidArgument, "server count must be at least 1");
  LoadProfile lp(dist, lambda);
  Point p = point_at(r, dist, lp, x);
  const double extra = k == 1 ? 0.0 : (k - 1) * p.z;
  return (p.tz / p.cz + k * x + extra) / p.cy;
}

double mgk_bound(const Mg1Metrics& m, int k) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "server count must be at least 1");
  if (k == 1) return m.Q + m.R;
  return m.Q + k * m.R + (k - 1) * m.S;
}

double mgk_bound(const RankFunction& r, const SizeDistribution& dist, double lambda, int k) {
  return mgk_bound(mg1_metrics(r, dist, lambda), k);
}

double heavy_traffic_scale(const SizeDistribution& dist, double rho, TrafficBranch branch) {
  if (branch == TrafficBranch::IV) {
    if (!(rho > 0.0 && rho < 1.0)) fail(ErrorCode::InvalidArgument, "rho must lie in (0, 1)");
    if (!dist.declared_classes().declares_or_within(1.0, 2.0))
      fail(ErrorCode::BranchMismatch, "infinite-variance branch needs a declared OR(1, 2) law");
    return std::log(1.0 / (1.0 - rho));
  }
  return heavy_traffic_scale(dist, RankFunction::build(Policy::MSERPT, dist), rho, branch);
}

double heavy_traffic_scale(const SizeDistribution& dist, const RankFunction& mserpt, double rho,
                           TrafficBranch branch) {
  if (!(rho > 0.0 && rho < 1.0)) fail(ErrorCode::InvalidArgument, "rho must lie in (0, 1)");
  const ClassSet& cls = dist.declared_classes();
  if (branch == TrafficBranch::IV) {
    if (!cls.declares_or_within(1.0, 2.0))
      fail(ErrorCode::BranchMismatch, "infinite-variance branch needs a declared OR(1, 2) law");
    return std::log(1.0 / (1.0 - rho));
  }
  const bool fits = cls.declares_or_within(2.0, kInfinity) || cls.has(DistClass::MDAGumbel) ||
                    cls.has(DistClass::ENBUE) || cls.has(DistClass::Bounded);
  if (!fits)
    fail(ErrorCode::BranchMismatch,
         "finite-variance branch needs a declared OR(2, inf), MDA, ENBUE, or Bounded law");
  const double a = dist.excess_tail_inverse(1.0 - rho);
  return 1.0 / ((1.0 - rho) * mserpt(a));
}

}  // namespace soapmgk
