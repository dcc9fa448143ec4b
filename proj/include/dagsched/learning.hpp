#pragma once

#include <vector>

#include "dagsched/mdp.hpp"
#include "dagsched/rng.hpp"

namespace dagsched {

struct LearningConfig {
  // visit-count step rules: c / n^exp
  double critic_c = 1.0, critic_exp = 0.7;
  double actor_c = 1.0, actor_exp = 0.8;   // actor slower than critic
  double pd_c = 1.0, pd_exp = 0.7;
  double exploration_floor = 0.05;
  int assoc_cap = 64;             // 1 reduces to the single-state actor-critic
  bool averaged_action = false;   // deterministic probability-weighted x
  double kappa0 = 0.1;            // price step kappa_k = kappa0 / (1 + k)
  int price_period = 100;         // K slots between price updates
  double lambda_max = 10.0;       // critic clip bound
  double pref_max = 60.0;         // actor preference clip (keeps softmax finite)
};

/// Greedy one-slot schedule: arg-max over feasible schedules of
///   u(s, y) + alpha * pd_value(post_decision(s, y)).
/// Reads neither the channel transition law nor the size distributions;
/// ties break to the lexicographically smallest y.
ScheduleAction greedy_schedule(
    const GopSpec& gop, const std::vector<DependencyPattern>& patterns,
    const std::vector<PatternStep>& steps, const TrafficState& state, int rate,
    double alpha, const std::function<double(const std::vector<int>&)>& pd_value);

/// lambda_{k+1} = [lambda_k + kappa (sum_i Ztilde^i - 1/(1-alpha))]^+ with
/// Ztilde^i the K-slot truncated discounted consumption of user i.
double stochastic_price_update(double lambda,
                               const std::vector<std::vector<double>>& user_allocations,
                               double kappa, double alpha);

/// Tabular actor-critic for one user over an enumerable state space.
/// Tables are dense over the (phase, state) index space; the post-decision
/// table is keyed by carryover buffers plus the current channel state.
class Learner {
 public:
  Learner(const StateSpace& space, LearningConfig cfg, double alpha);

  const StateSpace& space() const { return *space_; }
  const LearningConfig& config() const { return cfg_; }

  /// Softmax selection probabilities over the x grid at a state, with the
  /// exploration floor mixed in.
  std::vector<double> selection_probs(int phase, int state_idx) const;

  /// Samples x from the softmax (or returns the probability-weighted
  /// average when the averaged variant is configured). Remembers the
  /// selected grid index for the actor update.
  double select_resource(const UserState& s, Rng& explore);

  ScheduleAction schedule(const UserState& s, double x_hat) const;

  /// Actor/critic/post-decision update at one (possibly virtual) state.
  /// Returns the TD error.
  double td_update(const UserState& s, int x_req_idx, double x_hat,
                   const ScheduleAction& y, const UserState& s_next, double lambda);

  /// Real update plus virtual updates at the cap-bounded associated set,
  /// reusing the realized next channel and fresh-size draws.
  void associated_update(const UserState& s_real, double x_hat,
                         const ScheduleAction& y_real, int h_next,
                         const std::vector<int>& fresh_draws, double lambda,
                         Rng& explore);

  double critic(int phase, int state_idx) const { return critic_[phase][state_idx]; }
  double preference(int phase, int state_idx, int x_idx) const {
    return actor_[phase][state_idx * num_x_ + x_idx];
  }
  double pd_value(int phase, const std::vector<int>& pd, int h) const;
  void set_pd_value(int phase, const std::vector<int>& pd, int h, double value);
  void set_critic(int phase, int state_idx, double value) {
    critic_[phase][state_idx] = value;
  }
  void set_preference(int phase, int state_idx, int x_idx, double value) {
    actor_[phase][static_cast<size_t>(state_idx) * num_x_ + x_idx] = value;
  }
  long long critic_updates() const { return critic_updates_; }
  int last_selected_x() const { return last_x_idx_; }

  /// Deterministic greedy policy from the learned tables:
  /// x = arg-max preference (ties to the smallest x), y = greedy schedule.
  PolicyFn greedy_policy() const;

 private:
  int pd_index(int phase, const std::vector<int>& pd, int h) const;

  const StateSpace* space_;
  LearningConfig cfg_;
  double alpha_ = 0.0;
  int num_x_ = 0;
  double value_lo_ = 0.0, value_hi_ = 0.0;

  std::vector<std::vector<double>> critic_;    // [phase][state]
  std::vector<std::vector<double>> actor_;     // [phase][state * |X| + x]
  std::vector<std::vector<double>> pd_;        // [phase][pd index]
  std::vector<std::vector<int>> n_state_;
  std::vector<std::vector<int>> n_actor_;
  std::vector<std::vector<int>> n_pd_;
  std::vector<std::vector<int>> pd_radices_;   // per phase, digits of the pd key
  long long critic_updates_ = 0;
  int last_x_idx_ = 0;
};

}  // namespace dagsched
