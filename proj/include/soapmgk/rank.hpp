#pragma once

#include "soapmgk/distribution.hpp"

#include <functional>
#include <string>
#include <vector>

namespace soapmgk {

enum class Policy { FCFS, FB, SERPT, MSERPT, Gittins, MGittins, SRPT };

const char* policy_name(Policy p);
/// Accepts the names printed by policy_name ("m-gittins", ...). Throws ParseError.
Policy parse_policy(const std::string& name);
/// True for the policies whose rank function is monotone by construction.
bool policy_is_monotone(Policy p);

/// Time per completion: integral of the tail over [a, b] divided by
/// tail(a) - tail(b). b == a gives 1/h(a); b == inf gives E[X - a | X > a].
double eta(const SizeDistribution& dist, double a, double b);

double serpt_rank(const SizeDistribution& dist, double a);
double gittins_rank(const SizeDistribution& dist, double a);

struct AgeCutoffs {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;  // may be +inf
};

/// Piecewise-linear rank function r(a) on ascending age nodes. Past the last
/// node it continues linearly with the last slope if that slope is positive
/// and stays constant otherwise.
class RankFunction {
public:
  static RankFunction build(Policy policy, const SizeDistribution& dist);
  /// Raw table, mainly for tests. Ages must be strictly increasing.
  static RankFunction from_points(std::vector<double> ages, std::vector<double> ranks,
                                  Policy tag = Policy::SERPT,
                                  double support_sup = kInfinity);

  Policy policy() const { return policy_; }
  bool monotone() const { return monotone_; }
  double support_sup() const { return support_sup_; }
  const std::vector<double>& ages() const { return ages_; }
  const std::vector<double>& ranks() const { return ranks_; }

  double operator()(double a) const;
  /// Slope of r just to the right of a is positive.
  bool right_increasing(double a) const;

  /// First age b >= a with r(b) >= t (strict = false), or the infimum of
  /// ages b >= a with r(b) > t (strict = true). +inf if there is none.
  double next_crossing(double a, double t, bool strict) const;
  /// Smallest age b >= a where r stops increasing (the right slope is <= 0).
  double next_nonincreasing(double a) const;

  /// Requires a monotone function. Throws NotApplicable otherwise.
  AgeCutoffs cutoffs(double x) const;

private:
  friend RankFunction monotone_envelope(const RankFunction& base,
                                        const std::function<double(double)>& exact);
  void finalize();
  std::size_t segment_of(double a) const;
  long first_node_at_least(std::size_t from, double t, bool strict) const;
  double run_end_age(std::size_t i) const;

  Policy policy_ = Policy::FCFS;
  bool monotone_ = false;
  double support_sup_ = kInfinity;
  double tail_slope_ = 0.0;
  std::vector<double> ages_;
  std::vector<double> ranks_;
  std::vector<double> tree_;
  std::size_t leaves_ = 1;
  std::vector<std::size_t> nonincr_from_;
  std::vector<std::size_t> run_start_;  // first node of the run of equal values
  std::vector<std::size_t> run_end_;    // last node of that run
};

/// Running maximum of base. If exact is given, local maxima and the exits
/// from flat stretches are refined against it instead of the grid.
RankFunction monotone_envelope(const RankFunction& base,
                               const std::function<double(double)>& exact = {});

/// Age maximizing the SERPT rank on the grid (smallest such age).
/// Throws NotApplicable unless the distribution declares ENBUE or Bounded.
double peak_age(const SizeDistribution& dist);

struct CutoffGrowthRow {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double upper = 0.0;  // z/x (OR) or z/x^gamma (QDHR/QIMRL); +inf if z is
  double lower = 0.0;  // y^gamma/x (QDHR/QIMRL); NaN in the OR case
};

struct CutoffGrowthReport {
  enum class Mode { NotApplicable, OR, QDHR, QIMRL } mode = Mode::NotApplicable;
  double gamma = 1.0;
  std::vector<CutoffGrowthRow> rows;
  double min_upper = 0.0;
  double max_upper = 0.0;
  double min_lower = 0.0;
  double max_lower = 0.0;
};

CutoffGrowthReport cutoff_growth_diagnostic(const RankFunction& r, const SizeDistribution& dist,
                                            const std::vector<double>& sizes);

}  // namespace soapmgk
