#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dagsched/channel.hpp"
#include "dagsched/traffic.hpp"

namespace dagsched {

struct UserState {
  TrafficState traffic;
  int channel = 0;
};

/// Thrown when an enumeration would exceed the configured state budget.
struct StateBudgetError : std::runtime_error {
  long long computed_count;
  StateBudgetError(long long count, long long budget)
      : std::runtime_error("state space of " + std::to_string(count) +
                           " states exceeds budget of " + std::to_string(budget)),
        computed_count(count) {}
};

/// Enumerable product space of (buffer vector, channel state) per slot
/// phase. Buffer digits run over {-1, 0, .., l_max}; the periodic pattern
/// sequence makes the phase part of the state.
class StateSpace {
 public:
  StateSpace(GopSpec gop, ChannelSpec chan, std::vector<double> x_grid,
             long long budget = 1'000'000);

  int period() const { return gop_.period; }
  int num_channel_states() const { return chan_.num_states(); }
  int num_traffic_states(int phase) const { return traffic_counts_[phase]; }
  int num_states(int phase) const {
    return traffic_counts_[phase] * chan_.num_states();
  }
  long long total_states() const;

  const GopSpec& gop() const { return gop_; }
  const ChannelSpec& channel() const { return chan_; }
  const std::vector<double>& x_grid() const { return x_grid_; }
  const std::vector<DependencyPattern>& patterns() const { return patterns_; }
  const std::vector<PatternStep>& steps() const { return steps_; }

  int traffic_index(int phase, const std::vector<int>& buffers) const;
  std::vector<int> traffic_buffers(int phase, int traffic_idx) const;
  int state_index(int phase, int traffic_idx, int h) const {
    return traffic_idx * chan_.num_states() + h;
  }
  int traffic_of(int state_idx) const { return state_idx / chan_.num_states(); }
  int channel_of(int state_idx) const { return state_idx % chan_.num_states(); }

  UserState state(int phase, int state_idx) const;
  /// All states of one phase in index order.
  std::vector<UserState> enumerate_states(int phase) const;

 private:
  GopSpec gop_;
  ChannelSpec chan_;
  std::vector<double> x_grid_;
  std::vector<DependencyPattern> patterns_;
  std::vector<PatternStep> steps_;
  std::vector<std::vector<int>> radices_;  // per phase, per instance: l_max + 2
  std::vector<int> traffic_counts_;
};

/// One admissible (x, y) pair with its pre-computed traffic successor
/// distribution. Rewards are recomputed per lambda; the cache is not.
struct CachedAction {
  int x_idx = 0;
  double x = 0.0;
  ScheduleAction y;
  double util = 0.0;
  std::vector<std::pair<int, double>> next_traffic;  // (traffic idx at phase+1, prob)
};

/// Per-(phase, state) action lists in deterministic order: x ascending,
/// then y lexicographically ascending.
class ActionCache {
 public:
  explicit ActionCache(const StateSpace& space);
  const std::vector<CachedAction>& at(int phase, int state_idx) const {
    return actions_[phase][state_idx];
  }

 private:
  std::vector<std::vector<std::vector<CachedAction>>> actions_;
};

struct ValueTable {
  std::vector<std::vector<double>> v;  // [phase][state]
};

struct LocalPolicy {
  std::vector<std::vector<int>> x_idx;          // [phase][state]
  std::vector<std::vector<ScheduleAction>> y;   // [phase][state]
};

struct SolveResult {
  ValueTable values;
  LocalPolicy policy;
  int iterations = 0;
  double residual = 0.0;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iters = 100000;
  /// When >= 0, restrict the action search to this x-grid index (the
  /// scheduling-only problem at a pinned allocation).
  int forced_x_idx = -1;
};

/// Value iteration for the priced local problem
///   U(s) = max_{y,x} [u - lambda x + lambda/M + alpha E U(s')]
/// The lambda/M constant appears only for M >= 2; the single-user problem
/// has no constant term. Ties break to the smallest x, then the
/// lexicographically smallest y.
SolveResult solve_local(const StateSpace& space, const ActionCache& cache,
                        double lambda, double alpha, int num_users,
                        const SolveOptions& opts = {});

/// Probability vector over phase-0 states: every instance drawn fresh from
/// its size distribution, channel uniform.
std::vector<double> initial_distribution(const StateSpace& space);

/// Expected value of a distribution over phase-0 states under a table.
double expect_initial(const std::vector<double>& v0, const std::vector<double>& phase0_values);

/// Deterministic stationary policy given as (x fraction, schedule) per
/// (phase, state).
using PolicyFn = std::function<std::pair<double, ScheduleAction>(int phase, int state_idx)>;

struct EvalResult {
  ValueTable values;
  double initial_value = 0.0;
  double residual = 0.0;
};

/// Exact policy evaluation by solving (I - alpha P) v = r for the induced
/// Markov reward process. `reward` maps (phase, state, x, y) to the
/// per-slot reward.
EvalResult evaluate_policy(
    const StateSpace& space, const PolicyFn& policy, double alpha,
    const std::function<double(int phase, int state_idx, double x, const ScheduleAction& y)>& reward,
    const std::vector<double>& v0);

/// Convenience: evaluate under reward u - lambda x + lambda_const.
EvalResult evaluate_policy_priced(const StateSpace& space, const PolicyFn& policy,
                                  double alpha, double lambda, double lambda_const,
                                  const std::vector<double>& v0);

PolicyFn policy_fn(const StateSpace& space, const LocalPolicy& policy);

/// Exact average continuation of a post-decision state under a value
/// table: channel row times fresh-size product distribution. `pd` uses -2
/// for undrawn fresh slots, as produced by post_decision_buffers.
double exact_pd_value(const StateSpace& space, const ValueTable& values, int phase,
                      const std::vector<int>& pd, int h);

// ---------------------------------------------------------------------------
// Centralized joint solver (desk-scale oracle)

struct JointSolveResult {
  /// [joint phase][joint state]; joint phase runs over lcm of the periods.
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::vector<int>>> x_idx;  // [phase][state][user]
  std::vector<std::vector<std::vector<ScheduleAction>>> y;
  int iterations = 0;
  double residual = 0.0;
  int joint_period = 1;
};

struct JointOptions {
  SolveOptions solve;
  long long budget = 1'000'000;
  /// When true, drop the stage constraint sum x <= 1 and price resource
  /// use at `lambda` (reward u_i - lambda x_i + lambda/M per user).
  bool relaxed = false;
  double lambda = 0.0;
};

class JointSpace {
 public:
  JointSpace(std::vector<const StateSpace*> users, long long budget);
  int period() const { return period_; }
  int num_users() const { return static_cast<int>(users_.size()); }
  int num_states(int phase) const { return counts_[phase]; }
  int user_phase(int user, int joint_phase) const {
    return joint_phase % users_[user]->period();
  }
  std::vector<int> split(int phase, int joint_idx) const;
  int join(int phase, const std::vector<int>& per_user) const;
  const StateSpace& user(int i) const { return *users_[i]; }

 private:
  std::vector<const StateSpace*> users_;
  int period_ = 1;
  std::vector<int> counts_;
};

JointSolveResult solve_joint(const JointSpace& joint,
                             const std::vector<const ActionCache*>& caches,
                             double alpha, const JointOptions& opts = {});

/// U* at the product initial distribution.
double joint_initial_value(const JointSpace& joint, const JointSolveResult& sol,
                           const std::vector<std::vector<double>>& v0s);

}  // namespace dagsched
