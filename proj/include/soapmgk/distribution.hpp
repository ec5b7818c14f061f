#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace soapmgk {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Seeded 64-bit generator with a reproducible uniform(0,1) mapping.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x5ca1ab1eu};
    engine_.seed(seq);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log(uniform()) / rate; }

private:
  std::mt19937_64 engine_;
};

// Declared distribution-class memberships. They are metadata only: nothing
// in the library tries to infer them from the tail.
enum class DistClass { OR, QDHR, QIMRL, ENBUE, Bounded, MDAGumbel };

struct ClassDecl {
  DistClass kind;
  // OR: lower/upper tail exponents (alpha <= beta). QDHR/QIMRL: gamma in p1.
  double p1 = 0.0;
  double p2 = 0.0;
};

class ClassSet {
public:
  ClassSet() = default;
  ClassSet(std::initializer_list<ClassDecl> decls) : decls_(decls) {}

  bool has(DistClass kind) const { return find(kind) != nullptr; }
  const ClassDecl* find(DistClass kind) const;
  void add(ClassDecl decl) { decls_.push_back(decl); }
  const std::vector<ClassDecl>& items() const { return decls_; }
  bool empty() const { return decls_.empty(); }
  std::string to_string() const;

  /// Membership in OR(lo, hi) according to the declared exponents.
  bool declares_or_within(double lo, double hi) const;

private:
  std::vector<ClassDecl> decls_;
};

struct TruncatedMoments {
  double m1 = 0.0;  // E[min{X, a}]
  double m2 = 0.0;  // E[min{X, a}^2]
};

namespace family {
struct Exponential { double rate; };
struct Uniform { double lo, hi; };
struct Pareto { double xm, alpha; };
struct BoundedPareto { double xm, alpha, xmax; };
struct Hyperexponential { std::vector<double> probs, rates; };
struct Weibull { double shape, scale; };
struct PointMassMixture { std::vector<double> atoms, weights; };
}  // namespace family

using FamilyParams =
    std::variant<family::Exponential, family::Uniform, family::Pareto, family::BoundedPareto,
                 family::Hyperexponential, family::Weibull, family::PointMassMixture>;

/// Parametric job-size law with the functionals the analytic formulas need.
/// Immutable after construction; all queries are pure.
class SizeDistribution {
public:
  static SizeDistribution exponential(double rate);
  static SizeDistribution uniform(double lo, double hi);
  static SizeDistribution pareto(double xm, double alpha);
  static SizeDistribution bounded_pareto(double xm, double alpha, double xmax);
  static SizeDistribution hyperexponential(std::vector<double> probs, std::vector<double> rates);
  static SizeDistribution weibull(double shape, double scale);
  static SizeDistribution point_mass_mixture(std::vector<double> atoms, std::vector<double> weights);

  const FamilyParams& params() const { return params_; }
  const ClassSet& declared_classes() const { return classes_; }
  SizeDistribution with_classes(ClassSet classes) const;

  /// Canonical spec string, e.g. "exp(rate=1)".
  std::string describe() const;
  std::string family_name() const;

  double support_inf() const;
  double support_sup() const;
  bool bounded() const { return support_sup() < kInfinity; }
  bool has_atoms() const;

  double mean() const { return mean_; }
  double second_moment() const;

  double tail(double x) const;
  double density(double x) const;
  /// Throws UnsupportedPoint outside the support interior or at atoms.
  double hazard(double a) const;
  /// Hazard with the convention 0 where there is no mass yet (below the
  /// support) and +inf at or beyond the support end.
  double hazard_or_limit(double a) const;

  /// Integral of the tail over [a, b]; b may be +inf.
  double integrated_tail(double a, double b = kInfinity) const;
  /// tail(a) - tail(b), computed without cancellation where possible.
  double tail_drop(double a, double b) const;

  TruncatedMoments truncated_moments(double a) const;

  double excess_tail(double x) const;
  double excess_tail_inverse(double q) const;

  /// Smallest x with tail(x) <= u, for u in (0, 1].
  double tail_inverse(double u) const;

  /// Age past which the tail is below 1e-12 (the support end if bounded).
  double truncation_horizon() const { return horizon_; }
  /// Ages where the tail has a kink or jump (support edges, atoms).
  std::vector<double> breakpoints() const;

  double sample(Rng& rng) const;

private:
  explicit SizeDistribution(FamilyParams params);
  void finish(ClassSet defaults);

  FamilyParams params_;
  ClassSet classes_;
  double mean_ = 0.0;
  double horizon_ = 0.0;
};

}  // namespace soapmgk
