#pragma once

#include "soapmgk/rank.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace soapmgk {

/// Which cases the invariant suite sweeps over.
struct VerifyMatrix {
  std::vector<std::string> dists;  // distribution spec strings
  std::vector<double> rhos;
  std::vector<Policy> policies;
  bool simulate = true;            // include the simulator invariants
  std::uint64_t sim_jobs = 20000;  // per simulator check (warm-up included)
  std::uint64_t seed = 1;
  bool fault = false;  // negative control: corrupts the tail-form M/G/1 path
};

/// Exponential, hyperexponential and bounded Pareto at rho 0.5/0.8/0.9 under
/// FCFS, FB, M-SERPT and M-Gittins.
VerifyMatrix default_verify_matrix();

struct InvariantResult {
  std::string module;
  std::string name;
  std::string subject;  // the case it was checked on
  bool passed = true;
  double worst = 0.0;  // largest violation measure seen (0 when exact)
  std::string detail;
};

/// Runs every invariant over the matrix. Throws InvalidArgument when the
/// matrix is empty. A failing invariant is a result, not an exception.
std::vector<InvariantResult> run_invariants(const VerifyMatrix& m);

}  // namespace soapmgk
