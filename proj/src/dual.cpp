#include "dagsched/dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dagsched {

DualProblem::DualProblem(std::vector<StateSpace> users, double alpha, SolveOptions solve)
    : users_(std::move(users)), alpha_(alpha), solve_(solve) {
  for (const auto& u : users_) {
    caches_.push_back(std::make_unique<ActionCache>(u));
    v0_.push_back(initial_distribution(u));
  }
}

std::vector<SolveResult> DualProblem::solve_all(double lambda) const {
  std::vector<SolveResult> out;
  out.reserve(users_.size());
  for (int i = 0; i < num_users(); ++i)
    out.push_back(solve_local(users_[i], *caches_[i], lambda, alpha_, num_users(), solve_));
  return out;
}

double DualProblem::dual_value(double lambda) const {
  double total = 0.0;
  for (int i = 0; i < num_users(); ++i) {
    const SolveResult solved =
        solve_local(users_[i], *caches_[i], lambda, alpha_, num_users(), solve_);
    total += expect_initial(v0_[i], solved.values.v[0]);
  }
  return total;
}

double DualProblem::consumption(int user, const SolveResult& solved) const {
  const StateSpace& space = users_[user];
  const EvalResult z = evaluate_policy(
      space, policy_fn(space, solved.policy), alpha_,
      [&](int, int, double x, const ScheduleAction&) { return x; }, v0_[user]);
  if (z.residual > 1e-10)
    throw std::runtime_error("consumption linear solve residual " +
                             std::to_string(z.residual));
  return z.initial_value;
}

double DualProblem::subgradient(double lambda) const {
  double total = -1.0 / (1.0 - alpha_);
  const auto solved = solve_all(lambda);
  for (int i = 0; i < num_users(); ++i) total += consumption(i, solved[i]);
  return total;
}

PriceTrace price_iterate(const DualProblem& problem, const PricingConfig& cfg) {
  if (cfg.beta0 <= 0.0) throw std::invalid_argument("beta0 must be positive");
  PriceTrace trace;
  double lambda = cfg.lambda0;
  trace.best_dual = std::numeric_limits<double>::infinity();
  trace.best_lambda = lambda;

  for (int k = 0;; ++k) {
    const auto solved = problem.solve_all(lambda);
    double g = -1.0 / (1.0 - problem.alpha());
    double dual = 0.0;
    for (int i = 0; i < problem.num_users(); ++i) {
      dual += expect_initial(problem.initial(i), solved[i].values.v[0]);
      g += problem.consumption(i, solved[i]);
    }
    trace.records.push_back({k, lambda, g, dual});
    if (dual < trace.best_dual) {
      trace.best_dual = dual;
      trace.best_lambda = lambda;
    }
    if (k >= cfg.max_iters) break;
    const double beta = cfg.beta0 / (1.0 + k);
    const double next = std::max(0.0, lambda + beta * g);
    if (std::abs(next - lambda) <= cfg.tol) {
      lambda = next;
      trace.converged = true;
      break;
    }
    lambda = next;
  }
  return trace;
}

std::vector<double> scale_allocations(const std::vector<double>& requests) {
  double total = 0.0;
  for (double r : requests) {
    if (r < 0.0) throw std::invalid_argument("negative resource request");
    total += r;
  }
  if (total <= 1.0) return requests;
  std::vector<double> scaled(requests.size());
  for (size_t i = 0; i < requests.size(); ++i) scaled[i] = requests[i] / total;
  return scaled;
}

}  // namespace dagsched
