#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace soapmgk::numerics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  std::size_t max_panels = std::size_t{1} << 16;
  // For b = +inf: when horizon is finite the integral is cut at the horizon
  // and tail_correction(horizon) is added; otherwise the half-line is mapped
  // onto [0, 1) with x = a + t / (1 - t).
  double horizon = kInf;
  std::function<double(double)> tail_correction;
};

using RealFn = std::function<double(double)>;

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b].
///
/// Panels are bisected largest-error first until the summed error estimate
/// is below max(abs_tol, rel_tol * |value|). Throws ToleranceNotMet if the
/// panel budget runs out first.
QuadratureResult integrate_adaptive(const RealFn& f, double a, double b,
                                    const QuadratureOptions& opt = {});

/// Same as integrate_adaptive, but split at the given interior breakpoints
/// (unsorted, duplicates and out-of-range points are ignored). Useful when
/// the integrand has known jumps or kinks.
QuadratureResult integrate_pieces(const RealFn& f, double a, double b,
                                  std::span<const double> breakpoints,
                                  const QuadratureOptions& opt = {});

/// Bisection for f nonincreasing with f(lo) >= target >= f(hi). Stops when
/// the bracket is narrower than tol or after 60 halvings.
double bisect_monotone(const RealFn& f, double target, double lo, double hi,
                       double tol);

/// n geometrically spaced points from lo to hi, endpoints exact.
std::vector<double> build_log_grid(double lo, double hi, std::size_t n);

/// Golden-section search for a minimum of f on [lo, hi].
/// Returns the abscissa; relative tolerance on the abscissa.
double golden_section_min(const RealFn& f, double lo, double hi,
                          double rel_tol = 1e-8);

inline constexpr int kMaxBisections = 60;

}  // namespace soapmgk::numerics
