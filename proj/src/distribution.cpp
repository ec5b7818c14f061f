#include "soapmgk/distribution.hpp"

#include "soapmgk/error.hpp"
#include "soapmgk/numerics.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace soapmgk {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kHorizonTail = 1e-12;

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ':';
    out += fmt(xs[i]);
  }
  return out;
}

// (1 - r^p) for r = b/a >= 1 written as -expm1(p * log1p((b - a)/a)).
double one_minus_ratio_pow(double a, double b, double p) {
  if (b == kInfinity) return p < 0 ? 1.0 : -kInfinity;
  return -std::expm1(p * std::log1p((b - a) / a));
}

// (r^q - 1)/q for r = x / xm, continuous through q = 0.
double pow_minus_one_over(double ratio, double q) {
  const double l = std::log(ratio);
  if (q == 0.0) return l;
  return std::expm1(q * l) / q;
}

// ---- per-family closed forms -------------------------------------------

double tail_of(const family::Exponential& d, double x) {
  return x <= 0.0 ? 1.0 : std::exp(-d.rate * x);
}
double tail_of(const family::Uniform& d, double x) {
  if (x < d.lo) return 1.0;
  if (x >= d.hi) return 0.0;
  return (d.hi - x) / (d.hi - d.lo);
}
double tail_of(const family::Pareto& d, double x) {
  return x <= d.xm ? 1.0 : std::pow(x / d.xm, -d.alpha);
}
double bp_c(const family::BoundedPareto& d) {
  return 1.0 / -std::expm1(d.alpha * std::log(d.xm / d.xmax));
}
double bp_d(const family::BoundedPareto& d) { return std::pow(d.xm / d.xmax, d.alpha); }
double tail_of(const family::BoundedPareto& d, double x) {
  if (x <= d.xm) return 1.0;
  if (x >= d.xmax) return 0.0;
  return std::max(0.0, bp_c(d) * (std::pow(d.xm / x, d.alpha) - bp_d(d)));
}
double tail_of(const family::Hyperexponential& d, double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < d.probs.size(); ++i) s += d.probs[i] * std::exp(-d.rates[i] * x);
  return s;
}
double tail_of(const family::Weibull& d, double x) {
  return x <= 0.0 ? 1.0 : std::exp(-std::pow(x / d.scale, d.shape));
}
double tail_of(const family::PointMassMixture& d, double x) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.atoms.size(); ++i)
    if (d.atoms[i] > x) s += d.weights[i];
  return s;
}

// Integral of the tail over [a, b], 0 <= a <= b <= inf.
double tail_integral(const family::Exponential& d, double a, double b) {
  a = std::max(a, 0.0);
  if (b == kInfinity) return std::exp(-d.rate * a) / d.rate;
  return std::exp(-d.rate * a) * -std::expm1(-d.rate * (b - a)) / d.rate;
}
double tail_integral(const family::Uniform& d, double a, double b) {
  auto g = [&](double x) {
    if (x <= d.lo) return x;
    const double w = d.hi - d.lo;
    if (x >= d.hi) return d.lo + 0.5 * w;
    const double r = d.hi - x;
    return d.lo + (w * w - r * r) / (2.0 * w);
  };
  if (a >= d.hi) return 0.0;
  const double bb = std::min(b, d.hi);
  if (a >= d.lo) {
    // Direct form avoids cancellation near the upper end.
    const double ra = d.hi - a;
    const double rb = d.hi - bb;
    return (ra - rb) * (ra + rb) / (2.0 * (d.hi - d.lo));
  }
  return g(bb) - g(a);
}
double pareto_upper(double xm, double alpha, double A, double B) {
  // Integral of (t / xm)^-alpha over [A, B] with xm <= A <= B.
  if (B <= A) return 0.0;
  const double scale = xm * std::pow(A / xm, 1.0 - alpha);
  if (alpha == 1.0) return B == kInfinity ? kInfinity : xm * std::log1p((B - A) / A);
  return scale * one_minus_ratio_pow(A, B, 1.0 - alpha) / (alpha - 1.0);
}
double tail_integral(const family::Pareto& d, double a, double b) {
  double s = 0.0;
  if (a < d.xm) s += std::min(b, d.xm) - a;
  const double A = std::max(a, d.xm);
  if (b > A) s += pareto_upper(d.xm, d.alpha, A, b);
  return s;
}
double tail_integral(const family::BoundedPareto& d, double a, double b) {
  double s = 0.0;
  if (a < d.xm) s += std::min(b, d.xm) - a;
  const double A = std::clamp(a, d.xm, d.xmax);
  const double B = std::clamp(b, d.xm, d.xmax);
  if (B > A) s += bp_c(d) * (pareto_upper(d.xm, d.alpha, A, B) - bp_d(d) * (B - A));
  return std::max(s, 0.0);
}
double tail_integral(const family::Hyperexponential& d, double a, double b) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.probs.size(); ++i)
    s += d.probs[i] * tail_integral(family::Exponential{d.rates[i]}, a, b);
  return s;
}
double weibull_upper(const family::Weibull& d, double a) {
  const double k = d.shape;
  const double w = a <= 0.0 ? 0.0 : std::pow(a / d.scale, k);
  return d.scale * std::tgamma(1.0 + 1.0 / k) * boost::math::gamma_q(1.0 / k, w);
}
double weibull_lower(const family::Weibull& d, double a) {
  const double k = d.shape;
  if (a <= 0.0) return 0.0;
  const double w = std::pow(a / d.scale, k);
  return d.scale * std::tgamma(1.0 + 1.0 / k) * boost::math::gamma_p(1.0 / k, w);
}
double tail_integral(const family::Weibull& d, double a, double b) {
  if (b == kInfinity) return weibull_upper(d, a);
  // Pick the representation with less cancellation.
  if (tail_of(d, a) < 0.5) return std::max(0.0, weibull_upper(d, a) - weibull_upper(d, b));
  return std::max(0.0, weibull_lower(d, b) - weibull_lower(d, a));
}
double tail_integral(const family::PointMassMixture& d, double a, double b) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.atoms.size(); ++i)
    s += d.weights[i] * std::max(0.0, std::min(d.atoms[i], b) - a);
  return s;
}

// E[min{X, a}^2] = integral of 2 t tail(t) over [0, a].
double second_truncated(const family::Exponential& d, double a) {
  if (a == kInfinity) return 2.0 / (d.rate * d.rate);
  const double t = d.rate * a;
  return 2.0 * (-std::expm1(-t) - t * std::exp(-t)) / (d.rate * d.rate);
}
double second_truncated(const family::Uniform& d, double a) {
  const double x = std::min(a, d.hi);
  if (x <= d.lo) return x * x;
  auto prim = [&](double t) { return d.hi * t * t - 2.0 * t * t * t / 3.0; };
  return d.lo * d.lo + (prim(x) - prim(d.lo)) / (d.hi - d.lo);
}
double second_truncated(const family::Pareto& d, double a) {
  if (a <= d.xm) return a * a;
  if (a == kInfinity)
    return d.alpha > 2.0 ? d.xm * d.xm * d.alpha / (d.alpha - 2.0) : kInfinity;
  return d.xm * d.xm * (1.0 + 2.0 * pow_minus_one_over(a / d.xm, 2.0 - d.alpha));
}
double second_truncated(const family::BoundedPareto& d, double a) {
  if (a <= d.xm) return a * a;
  const double x = std::min(a, d.xmax);
  const double pareto_part = 2.0 * d.xm * d.xm * pow_minus_one_over(x / d.xm, 2.0 - d.alpha);
  return d.xm * d.xm + bp_c(d) * (pareto_part - bp_d(d) * (x * x - d.xm * d.xm));
}
double second_truncated(const family::Hyperexponential& d, double a) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.probs.size(); ++i)
    s += d.probs[i] * second_truncated(family::Exponential{d.rates[i]}, a);
  return s;
}
double second_truncated(const family::Weibull& d, double a) {
  const double k = d.shape;
  const double full = d.scale * d.scale * std::tgamma(1.0 + 2.0 / k);
  if (a == kInfinity) return full;
  if (a <= 0.0) return 0.0;
  return full * boost::math::gamma_p(2.0 / k, std::pow(a / d.scale, k));
}
double second_truncated(const family::PointMassMixture& d, double a) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.atoms.size(); ++i) {
    const double m = std::min(d.atoms[i], a);
    s += d.weights[i] * m * m;
  }
  return s;
}

double density_of(const family::Exponential& d, double x) {
  return x < 0.0 ? 0.0 : d.rate * std::exp(-d.rate * x);
}
double density_of(const family::Uniform& d, double x) {
  return (x < d.lo || x > d.hi) ? 0.0 : 1.0 / (d.hi - d.lo);
}
double density_of(const family::Pareto& d, double x) {
  return x < d.xm ? 0.0 : d.alpha / d.xm * std::pow(x / d.xm, -d.alpha - 1.0);
}
double density_of(const family::BoundedPareto& d, double x) {
  if (x < d.xm || x > d.xmax) return 0.0;
  return bp_c(d) * d.alpha / d.xm * std::pow(d.xm / x, d.alpha + 1.0);
}
double density_of(const family::Hyperexponential& d, double x) {
  if (x < 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < d.probs.size(); ++i)
    s += d.probs[i] * d.rates[i] * std::exp(-d.rates[i] * x);
  return s;
}
double density_of(const family::Weibull& d, double x) {
  if (x < 0.0) return 0.0;
  const double k = d.shape;
  const double r = x / d.scale;
  return k / d.scale * std::pow(r, k - 1.0) * std::exp(-std::pow(r, k));
}
double density_of(const family::PointMassMixture&, double) { return 0.0; }

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace

// ---- ClassSet ---------------------------------------------------------------

const ClassDecl* ClassSet::find(DistClass kind) const {
  for (const auto& d : decls_)
    if (d.kind == kind) return &d;
  return nullptr;
}

bool ClassSet::declares_or_within(double lo, double hi) const {
  const ClassDecl* d = find(DistClass::OR);
  return d != nullptr && d->p1 > lo && d->p2 < hi && d->p1 <= d->p2;
}

std::string ClassSet::to_string() const {
  std::string out;
  for (const auto& d : decls_) {
    if (!out.empty()) out += '+';
    switch (d.kind) {
      case DistClass::OR: out += "or:" + fmt(d.p1) + ":" + fmt(d.p2); break;
      case DistClass::QDHR: out += "qdhr:" + fmt(d.p1); break;
      case DistClass::QIMRL: out += "qimrl:" + fmt(d.p1); break;
      case DistClass::ENBUE: out += "enbue"; break;
      case DistClass::Bounded: out += "bounded"; break;
      case DistClass::MDAGumbel: out += "mda"; break;
    }
  }
  return out;
}

// ---- construction -----------------------------------------------------------

SizeDistribution::SizeDistribution(FamilyParams params) : params_(std::move(params)) {}

void SizeDistribution::finish(ClassSet defaults) {
  classes_ = std::move(defaults);
  mean_ = integrated_tail(0.0, kInfinity);
  require(std::isfinite(mean_) && mean_ > 0.0, "distribution mean must be finite and positive");
  horizon_ = bounded() ? support_sup() : tail_inverse(kHorizonTail);
}

SizeDistribution SizeDistribution::exponential(double rate) {
  require(rate > 0.0 && std::isfinite(rate), "exp: rate must be positive");
  SizeDistribution d(family::Exponential{rate});
  d.finish({{DistClass::ENBUE}, {DistClass::MDAGumbel}});
  return d;
}

SizeDistribution SizeDistribution::uniform(double lo, double hi) {
  require(lo >= 0.0 && hi > lo && std::isfinite(hi), "uniform: need 0 <= lo < hi");
  SizeDistribution d(family::Uniform{lo, hi});
  d.finish({{DistClass::Bounded}, {DistClass::ENBUE}});
  return d;
}

SizeDistribution SizeDistribution::pareto(double xm, double alpha) {
  require(xm > 0.0 && std::isfinite(xm), "pareto: xm must be positive");
  require(alpha > 1.0 && std::isfinite(alpha), "pareto: alpha must exceed 1 (finite mean)");
  SizeDistribution d(family::Pareto{xm, alpha});
  d.finish({{DistClass::OR, alpha, alpha}});
  return d;
}

SizeDistribution SizeDistribution::bounded_pareto(double xm, double alpha, double xmax) {
  require(xm > 0.0 && xmax > xm && std::isfinite(xmax), "boundedpareto: need 0 < xm < xmax");
  require(alpha > 0.0 && std::isfinite(alpha), "boundedpareto: alpha must be positive");
  SizeDistribution d(family::BoundedPareto{xm, alpha, xmax});
  d.finish({{DistClass::Bounded}, {DistClass::ENBUE}});
  return d;
}

SizeDistribution SizeDistribution::hyperexponential(std::vector<double> probs,
                                                    std::vector<double> rates) {
  require(!probs.empty() && probs.size() == rates.size(),
          "hyperexp: need matching nonempty p and mu lists");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    require(probs[i] > 0.0, "hyperexp: branch probabilities must be positive");
    require(rates[i] > 0.0 && std::isfinite(rates[i]), "hyperexp: rates must be positive");
    total += probs[i];
  }
  require(std::abs(total - 1.0) < 1e-9, "hyperexp: branch probabilities must sum to 1");
  for (double& p : probs) p /= total;
  SizeDistribution d(family::Hyperexponential{std::move(probs), std::move(rates)});
  d.finish({{DistClass::MDAGumbel}, {DistClass::QDHR, 1.0}, {DistClass::QIMRL, 1.0}});
  return d;
}

SizeDistribution SizeDistribution::weibull(double shape, double scale) {
  require(shape > 0.0 && std::isfinite(shape), "weibull: shape must be positive");
  require(scale > 0.0 && std::isfinite(scale), "weibull: scale must be positive");
  SizeDistribution d(family::Weibull{shape, scale});
  ClassSet cls{{DistClass::MDAGumbel}};
  if (shape <= 1.0) cls.add({DistClass::QDHR, 1.0});
  if (shape >= 1.0) cls.add({DistClass::ENBUE});
  d.finish(std::move(cls));
  return d;
}

SizeDistribution SizeDistribution::point_mass_mixture(std::vector<double> atoms,
                                                      std::vector<double> weights) {
  require(!atoms.empty() && atoms.size() == weights.size(),
          "pointmass: need matching nonempty x and w lists");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    require(atoms[i] > 0.0 && std::isfinite(atoms[i]), "pointmass: atoms must be positive");
    require(weights[i] > 0.0, "pointmass: weights must be positive");
    total += weights[i];
  }
  require(std::abs(total - 1.0) < 1e-9, "pointmass: weights must sum to 1");
  for (double& w : weights) w /= total;
  SizeDistribution d(family::PointMassMixture{std::move(atoms), std::move(weights)});
  d.finish({{DistClass::Bounded}, {DistClass::ENBUE}});
  return d;
}

SizeDistribution SizeDistribution::with_classes(ClassSet classes) const {
  SizeDistribution copy = *this;
  copy.classes_ = std::move(classes);
  return copy;
}

// ---- descriptors -------------------------------------------------------------

std::string SizeDistribution::family_name() const {
  return std::visit(overloaded{
                        [](const family::Exponential&) { return std::string("exp"); },
                        [](const family::Uniform&) { return std::string("uniform"); },
                        [](const family::Pareto&) { return std::string("pareto"); },
                        [](const family::BoundedPareto&) { return std::string("boundedpareto"); },
                        [](const family::Hyperexponential&) { return std::string("hyperexp"); },
                        [](const family::Weibull&) { return std::string("weibull"); },
                        [](const family::PointMassMixture&) { return std::string("pointmass"); },
                    },
                    params_);
}

std::string SizeDistribution::describe() const {
  std::string args = std::visit(
      overloaded{
          [](const family::Exponential& d) { return "rate=" + fmt(d.rate); },
          [](const family::Uniform& d) { return "lo=" + fmt(d.lo) + ",hi=" + fmt(d.hi); },
          [](const family::Pareto& d) { return "xm=" + fmt(d.xm) + ",alpha=" + fmt(d.alpha); },
          [](const family::BoundedPareto& d) {
            return "xm=" + fmt(d.xm) + ",alpha=" + fmt(d.alpha) + ",xmax=" + fmt(d.xmax);
          },
          [](const family::Hyperexponential& d) {
            return "p=" + join(d.probs) + ",mu=" + join(d.rates);
          },
          [](const family::Weibull& d) {
            return "shape=" + fmt(d.shape) + ",scale=" + fmt(d.scale);
          },
          [](const family::PointMassMixture& d) {
            return "x=" + join(d.atoms) + ",w=" + join(d.weights);
          },
      },
      params_);
  return family_name() + "(" + args + ")";
}

double SizeDistribution::support_inf() const {
  return std::visit(overloaded{
                        [](const family::Uniform& d) { return d.lo; },
                        [](const family::Pareto& d) { return d.xm; },
                        [](const family::BoundedPareto& d) { return d.xm; },
                        [](const family::PointMassMixture& d) {
                          return *std::min_element(d.atoms.begin(), d.atoms.end());
                        },
                        [](const auto&) { return 0.0; },
                    },
                    params_);
}

double SizeDistribution::support_sup() const {
  return std::visit(overloaded{
                        [](const family::Uniform& d) { return d.hi; },
                        [](const family::BoundedPareto& d) { return d.xmax; },
                        [](const family::PointMassMixture& d) {
                          return *std::max_element(d.atoms.begin(), d.atoms.end());
                        },
                        [](const auto&) { return kInfinity; },
                    },
                    params_);
}

bool SizeDistribution::has_atoms() const {
  return std::holds_alternative<family::PointMassMixture>(params_);
}

double SizeDistribution::second_moment() const { return truncated_moments(kInfinity).m2; }

std::vector<double> SizeDistribution::breakpoints() const {
  return std::visit(overloaded{
                        [](const family::Uniform& d) { return std::vector<double>{d.lo, d.hi}; },
                        [](const family::Pareto& d) { return std::vector<double>{d.xm}; },
                        [](const family::BoundedPareto& d) {
                          return std::vector<double>{d.xm, d.xmax};
                        },
                        [](const family::PointMassMixture& d) { return d.atoms; },
                        [](const auto&) { return std::vector<double>{}; },
                    },
                    params_);
}

// ---- functionals -------------------------------------------------------------

double SizeDistribution::tail(double x) const {
  if (x < 0.0) return 1.0;
  return std::visit([x](const auto& d) { return tail_of(d, x); }, params_);
}

double SizeDistribution::density(double x) const {
  return std::visit([x](const auto& d) { return density_of(d, x); }, params_);
}

double SizeDistribution::hazard(double a) const {
  if (has_atoms()) fail(ErrorCode::UnsupportedPoint, "hazard is undefined for point masses");
  if (!(a >= support_inf() && a < support_sup())) {
    std::ostringstream os;
    os << "hazard requested at age " << a << " outside the support interior of " << describe();
    fail(ErrorCode::UnsupportedPoint, os.str());
  }
  return hazard_or_limit(a);
}

double SizeDistribution::hazard_or_limit(double a) const {
  if (a >= support_sup()) return kInfinity;
  return std::visit(overloaded{
                        [a](const family::Exponential& d) { return d.rate; },
                        [a](const family::Pareto& d) { return a < d.xm ? 0.0 : d.alpha / a; },
                        [a](const family::Weibull& d) {
                          if (a <= 0.0) return d.shape < 1.0 ? kInfinity : (d.shape == 1.0 ? 1.0 / d.scale : 0.0);
                          return d.shape / d.scale * std::pow(a / d.scale, d.shape - 1.0);
                        },
                        [this, a](const auto& d) {
                          const double t = tail_of(d, a);
                          return t > 0.0 ? density_of(d, a) / t : kInfinity;
                        },
                    },
                    params_);
}

double SizeDistribution::integrated_tail(double a, double b) const {
  a = std::max(a, 0.0);
  if (!(b > a)) return 0.0;
  return std::visit([a, b](const auto& d) { return tail_integral(d, a, b); }, params_);
}

double SizeDistribution::tail_drop(double a, double b) const {
  a = std::max(a, 0.0);
  if (!(b > a)) return 0.0;
  return std::visit(
      overloaded{
          [a, b](const family::Exponential& d) {
            if (b == kInfinity) return std::exp(-d.rate * a);
            return std::exp(-d.rate * a) * -std::expm1(-d.rate * (b - a));
          },
          [a, b](const family::Hyperexponential& d) {
            double s = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i) {
              const double mu = d.rates[i];
              s += d.probs[i] * std::exp(-mu * a) *
                   (b == kInfinity ? 1.0 : -std::expm1(-mu * (b - a)));
            }
            return s;
          },
          [a, b](const family::Pareto& d) {
            if (b <= d.xm) return 0.0;
            const double A = std::max(a, d.xm);
            return std::pow(A / d.xm, -d.alpha) * one_minus_ratio_pow(A, b, -d.alpha);
          },
          [a, b](const family::BoundedPareto& d) {
            const double A = std::clamp(a, d.xm, d.xmax);
            const double B = std::clamp(b, d.xm, d.xmax);
            if (B <= A) return 0.0;
            return bp_c(d) * std::pow(d.xm / A, d.alpha) * one_minus_ratio_pow(A, B, -d.alpha);
          },
          [a, b](const auto& d) { return tail_of(d, a) - (b == kInfinity ? 0.0 : tail_of(d, b)); },
      },
      params_);
}

TruncatedMoments SizeDistribution::truncated_moments(double a) const {
  if (a <= 0.0) return {0.0, 0.0};
  TruncatedMoments tm;
  tm.m1 = a == kInfinity ? mean_ : integrated_tail(0.0, a);
  tm.m2 = std::visit([a](const auto& d) { return second_truncated(d, a); }, params_);
  return tm;
}

double SizeDistribution::excess_tail(double x) const {
  if (x <= 0.0) return 1.0;
  return std::clamp(integrated_tail(x, kInfinity) / mean_, 0.0, 1.0);
}

double SizeDistribution::excess_tail_inverse(double q) const {
  if (!(q > 0.0 && q <= 1.0))
    fail(ErrorCode::InvalidArgument, "excess_tail_inverse: q must lie in (0, 1]");
  if (q == 1.0) return 0.0;
  // Bracket by doubling from the mean so the tolerance tracks the root.
  double lo = 0.0;
  double hi = bounded() ? std::min(mean_, support_sup()) : mean_;
  while (excess_tail(hi) > q) {
    if (bounded() && hi >= support_sup()) break;
    lo = hi;
    hi = bounded() ? std::min(2.0 * hi, support_sup()) : 2.0 * hi;
    if (hi > 1e300 || tail(hi) == 0.0) {
      if (excess_tail(hi) > q) {
        std::ostringstream os;
        os << "excess tail of " << describe() << " never drops to " << q;
        fail(ErrorCode::NoSolution, os.str());
      }
      break;
    }
  }
  return numerics::bisect_monotone([this](double x) { return excess_tail(x); }, q, lo, hi,
                                   1e-15 * hi);
}

double SizeDistribution::tail_inverse(double u) const {
  if (!(u > 0.0)) fail(ErrorCode::InvalidArgument, "tail_inverse: u must be positive");
  if (u >= 1.0) return support_inf();
  return std::visit(
      overloaded{
          [u](const family::Exponential& d) { return -std::log(u) / d.rate; },
          [u](const family::Uniform& d) { return d.hi - u * (d.hi - d.lo); },
          [u](const family::Pareto& d) { return d.xm * std::pow(u, -1.0 / d.alpha); },
          [u](const family::BoundedPareto& d) {
            const double v = u / bp_c(d) + bp_d(d);
            return std::min(d.xmax, d.xm * std::pow(v, -1.0 / d.alpha));
          },
          [u](const family::Weibull& d) {
            return d.scale * std::pow(-std::log(u), 1.0 / d.shape);
          },
          [u](const family::Hyperexponential& d) {
            double hi = 0.0;
            for (std::size_t i = 0; i < d.probs.size(); ++i)
              hi = std::max(hi, -std::log(u) / d.rates[i]);
            // Every branch tail is below u at hi, so the mixture is too.
            return numerics::bisect_monotone([&d](double x) { return tail_of(d, x); }, u, 0.0,
                                             hi, 0.0);
          },
          [u](const family::PointMassMixture& d) {
            std::vector<std::size_t> idx(d.atoms.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::sort(idx.begin(), idx.end(),
                      [&d](std::size_t i, std::size_t j) { return d.atoms[i] < d.atoms[j]; });
            for (std::size_t i : idx)
              if (tail_of(d, d.atoms[i]) <= u) return d.atoms[i];
            return d.atoms[idx.back()];
          },
      },
      params_);
}

double SizeDistribution::sample(Rng& rng) const {
  return std::visit(
      overloaded{
          [&rng](const family::Exponential& d) { return rng.exponential(d.rate); },
          [&rng](const family::Hyperexponential& d) {
            const double u = rng.uniform();
            double acc = 0.0;
            std::size_t branch = d.probs.size() - 1;
            for (std::size_t i = 0; i < d.probs.size(); ++i) {
              acc += d.probs[i];
              if (u < acc) {
                branch = i;
                break;
              }
            }
            return rng.exponential(d.rates[branch]);
          },
          [&rng](const family::PointMassMixture& d) {
            const double u = rng.uniform();
            double acc = 0.0;
            for (std::size_t i = 0; i < d.atoms.size(); ++i) {
              acc += d.weights[i];
              if (u < acc) return d.atoms[i];
            }
            return d.atoms.back();
          },
          [this, &rng](const auto&) { return tail_inverse(rng.uniform()); },
      },
      params_);
}

}  // namespace soapmgk
