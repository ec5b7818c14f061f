#pragma once

#include "soapmgk/distribution.hpp"
#include "soapmgk/rank.hpp"

namespace soapmgk {

/// rho_bar(a) = 1 - lambda E[min{X, a}] and tau(a) = (lambda / 2) E[min{X, a}^2].
class LoadProfile {
public:
  /// Throws Overload unless rho = lambda E[X] < 1.
  LoadProfile(const SizeDistribution& dist, double lambda);

  double lambda() const { return lambda_; }
  double rho() const { return rho_; }
  double coload(double a) const;
  double tau(double a) const;

private:
  const SizeDistribution* dist_;
  double lambda_;
  double rho_;
};

struct Mg1Metrics {
  double Q = 0.0;
  double R = 0.0;
  double S = 0.0;  // may be +inf
  double T = 0.0;
};

struct KeyQuantities {
  double Qa = 0.0;
  double Qb = 0.0;
  double Rb = 0.0;
  double Rc = 0.0;
  double Sb = 0.0;
  double Sc = 0.0;  // may be +inf
};

/// Mean waiting, residence, and inflated residence time under a monotone
/// SOAP policy, integrated against the size law.
Mg1Metrics mg1_metrics(const RankFunction& r, const SizeDistribution& dist, double lambda);

KeyQuantities key_quantities(const RankFunction& r, const SizeDistribution& dist, double lambda);

/// The same means from single integrals over size written with tails.
/// fault_injection flips the sign of one term (used as a negative control).
Mg1Metrics mg1_metrics_alt(const RankFunction& r, const SizeDistribution& dist, double lambda,
                           bool fault_injection = false);

/// Upper bound on mean response time of size x in the k-server system.
double mgk_bound_at(const RankFunction& r, const SizeDistribution& dist, double lambda, int k,
                    double x);
/// Q + k R + (k - 1) S; +inf when S is infinite and k > 1.
double mgk_bound(const Mg1Metrics& m, int k);
double mgk_bound(const RankFunction& r, const SizeDistribution& dist, double lambda, int k);

enum class TrafficBranch { IV, FV };

/// Order-of-magnitude predictor for mean response time as rho -> 1.
/// IV: log(1 / (1 - rho)). FV: 1 / ((1 - rho) r_MSERPT(Fe^{-1}(1 - rho))).
/// Throws BranchMismatch when the declared classes do not fit the branch.
double heavy_traffic_scale(const SizeDistribution& dist, double rho, TrafficBranch branch);
double heavy_traffic_scale(const SizeDistribution& dist, const RankFunction& mserpt, double rho,
                           TrafficBranch branch);

}  // namespace soapmgk
