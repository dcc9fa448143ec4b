#pragma once

#include <memory>
#include <vector>

#include "dagsched/mdp.hpp"

namespace dagsched {

/// Per-user state spaces plus shared discount; the cached action lists are
/// reused across every lambda the dual touches.
class DualProblem {
 public:
  DualProblem(std::vector<StateSpace> users, double alpha,
              SolveOptions solve = {});

  int num_users() const { return static_cast<int>(users_.size()); }
  double alpha() const { return alpha_; }
  const StateSpace& user(int i) const { return users_[i]; }
  const ActionCache& cache(int i) const { return *caches_[i]; }
  const std::vector<double>& initial(int i) const { return v0_[i]; }
  const SolveOptions& solve_options() const { return solve_; }

  /// U(lambda) = sum_i sum_s v(s0) U^i(s0, lambda); solves each user's
  /// local problem with the lambda/M constant.
  double dual_value(double lambda) const;

  /// sum_i Z^i - 1/(1-alpha); Z^i is the expected discounted accumulated
  /// resource consumption under user i's lambda-optimal policy, from a
  /// linear solve of (I - alpha P^i) z = x^i.
  double subgradient(double lambda) const;

  std::vector<SolveResult> solve_all(double lambda) const;

  /// Expected discounted consumption of one solved policy.
  double consumption(int user, const SolveResult& solved) const;

 private:
  std::vector<StateSpace> users_;
  double alpha_;
  SolveOptions solve_;
  std::vector<std::unique_ptr<ActionCache>> caches_;
  std::vector<std::vector<double>> v0_;
};

struct PricingConfig {
  double lambda0 = 0.0;
  double beta0 = 0.1;     // step k uses beta0 / (1 + k)
  int max_iters = 200;
  double tol = 1e-4;      // on |lambda_{k+1} - lambda_k|
};

struct PriceRecord {
  int k = 0;
  double lambda = 0.0;
  double subgradient = 0.0;
  double dual_value = 0.0;
};

struct PriceTrace {
  std::vector<PriceRecord> records;
  double best_lambda = 0.0;
  double best_dual = 0.0;
  bool converged = false;
};

/// Projected subgradient iteration on the uniform price; returns the
/// incumbent with the lowest dual value seen (the iteration itself is not
/// monotone).
PriceTrace price_iterate(const DualProblem& problem, const PricingConfig& cfg);

/// Proportional scale-down when requests exceed the slot budget; requests
/// within budget pass through unchanged.
std::vector<double> scale_allocations(const std::vector<double>& requests);

}  // namespace dagsched
