#include "soapmgk/numerics.hpp"

#include "soapmgk/error.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace soapmgk {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::Overload: return "overload";
    case ErrorCode::UnsupportedPoint: return "unsupported-point";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::NoSolution: return "no-solution";
    case ErrorCode::BadBracket: return "bad-bracket";
    case ErrorCode::ToleranceNotMet: return "tolerance-not-met";
    case ErrorCode::NotApplicable: return "not-applicable";
    case ErrorCode::BranchMismatch: return "branch-mismatch";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::NonConvergence: return "nonconvergence";
  }
  return "unknown";
}

namespace numerics {
namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
using Gauss = boost::math::quadrature::gauss<double, 7>;

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

// Kronrod abscissae interleave the Gauss ones: even indices are shared.
Panel eval_panel(const RealFn& f, double a, double b, std::size_t& evals) {
  const auto& xk = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);

  const double f0 = f(mid);
  double kron = wk[0] * f0;
  double gauss = wg[0] * f0;
  ++evals;
  for (std::size_t i = 1; i < xk.size(); ++i) {
    const double dx = half * xk[i];
    const double fsum = f(mid - dx) + f(mid + dx);
    evals += 2;
    kron += wk[i] * fsum;
    if (i % 2 == 0) gauss += wg[i / 2] * fsum;
  }
  kron *= half;
  gauss *= half;
  double err = std::abs(kron - gauss);
  if (!std::isfinite(kron)) err = kInf;
  return {a, b, kron, err};
}

QuadratureResult integrate_finite(const RealFn& f, double a, double b,
                                  const QuadratureOptions& opt) {
  QuadratureResult out;
  if (a == b) return out;
  std::priority_queue<Panel> heap;
  std::size_t evals = 0;
  Panel first = eval_panel(f, a, b, evals);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  std::size_t panels = 1;

  auto done = [&] {
    return total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
  };
  while (!done()) {
    if (panels >= opt.max_panels) {
      std::ostringstream os;
      os << "quadrature on [" << a << ", " << b << "] reached " << panels
         << " panels with error estimate " << total_err;
      fail(ErrorCode::ToleranceNotMet, os.str());
    }
    Panel worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {
      // Panel is at floating-point resolution; accept it as is.
      total_err -= worst.error;
      worst.error = 0.0;
      heap.push(worst);
      if (heap.top().error == 0.0) break;
      continue;
    }
    Panel left = eval_panel(f, worst.a, m, evals);
    Panel right = eval_panel(f, m, worst.b, evals);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
    // Re-sum occasionally so cancellation in the running totals cannot drift.
    if (panels % 256 == 0) {
      std::priority_queue<Panel> copy = heap;
      total = 0.0;
      total_err = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_err += copy.top().error;
        copy.pop();
      }
    }
  }
  std::priority_queue<Panel> copy = heap;
  total = 0.0;
  total_err = 0.0;
  while (!copy.empty()) {
    total += copy.top().value;
    total_err += copy.top().error;
    copy.pop();
  }
  out.value = total;
  out.error_estimate = total_err;
  out.evaluations = evals;
  return out;
}

}  // namespace

QuadratureResult integrate_adaptive(const RealFn& f, double a, double b,
                                    const QuadratureOptions& opt) {
  if (!(opt.abs_tol > 0.0 || opt.rel_tol > 0.0))
    fail(ErrorCode::InvalidArgument, "quadrature tolerance must be positive");
  if (std::isnan(a) || std::isnan(b) || std::isinf(a))
    fail(ErrorCode::InvalidArgument, "quadrature bounds must be finite numbers (b may be +inf)");
  if (b < a) {
    QuadratureResult r = integrate_adaptive(f, b, a, opt);
    r.value = -r.value;
    return r;
  }
  if (std::isfinite(b)) return integrate_finite(f, a, b, opt);

  if (std::isfinite(opt.horizon) && opt.horizon > a) {
    QuadratureResult r = integrate_finite(f, a, opt.horizon, opt);
    if (opt.tail_correction) r.value += opt.tail_correction(opt.horizon);
    return r;
  }
  auto mapped = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double s = 1.0 - t;
    const double x = a + t / s;
    const double v = f(x);
    return v == 0.0 ? 0.0 : v / (s * s);
  };
  return integrate_finite(mapped, 0.0, 1.0, opt);
}

QuadratureResult integrate_pieces(const RealFn& f, double a, double b,
                                  std::span<const double> breakpoints,
                                  const QuadratureOptions& opt) {
  std::vector<double> cuts;
  cuts.reserve(breakpoints.size() + 2);
  cuts.push_back(a);
  for (double p : breakpoints)
    if (p > a && p < b) cuts.push_back(p);
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(b);

  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    QuadratureResult piece = integrate_adaptive(f, cuts[i], cuts[i + 1], opt);
    total.value += piece.value;
    total.error_estimate += piece.error_estimate;
    total.evaluations += piece.evaluations;
  }
  return total;
}

double bisect_monotone(const RealFn& f, double target, double lo, double hi,
                       double tol) {
  if (!(lo <= hi)) fail(ErrorCode::BadBracket, "bisection bracket has lo > hi");
  const double flo = f(lo);
  const double fhi = f(hi);
  if (!(flo >= target && target >= fhi)) {
    std::ostringstream os;
    os << "bisection bracket [" << lo << ", " << hi << "] does not contain target "
       << target << " (f(lo) = " << flo << ", f(hi) = " << fhi << ")";
    fail(ErrorCode::BadBracket, os.str());
  }
  if (flo == target) return lo;
  if (fhi == target) return hi;
  for (int i = 0; i < kMaxBisections && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double fm = f(mid);
    if (fm == target) return mid;
    if (fm > target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> build_log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi > lo && n >= 2))
    fail(ErrorCode::InvalidArgument, "log grid needs 0 < lo < hi and n >= 2");
  std::vector<double> grid(n);
  const double llo = std::log(lo);
  const double step = (std::log(hi) - llo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = std::exp(llo + step * static_cast<double>(i));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

double golden_section_min(const RealFn& f, double lo, double hi, double rel_tol) {
  if (!(lo <= hi)) fail(ErrorCode::InvalidArgument, "golden-section bracket has lo > hi");
  if (lo == hi) return lo;
  const int bits = std::clamp(static_cast<int>(std::ceil(-std::log2(rel_tol))), 8, 52);
  auto r = boost::math::tools::brent_find_minima(f, lo, hi, bits);
  return r.first;
}

}  // namespace numerics
}  // namespace soapmgk
