#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dagsched/dual.hpp"
#include "dagsched/learning.hpp"
#include "dagsched/mdp.hpp"
#include "dagsched/rng.hpp"

namespace dagsched {

struct SlotRow {
  long long slot = 0;
  int user = 0;
  int phase = 0;
  int channel = 0;
  std::string buffers;   // colon-joined
  double x_req = 0.0;
  double x_hat = 0.0;
  std::string schedule;  // colon-joined
  double util = 0.0;
  double lambda = 0.0;
};

struct MetricsLog {
  std::vector<SlotRow> rows;
  std::vector<double> discounted_utility;      // per user, sum alpha^t u_t
  std::vector<double> discounted_priced;       // per user, sum alpha^t (u_t - lambda x_hat)
  double total_discounted = 0.0;
  long long violations = 0;                    // slots with sum x_hat > 1 + 1e-12
  std::vector<int> dual_iters_per_slot;        // myopic dual variant only
  std::uint64_t seed = 0;

  /// One CSV per user plus an aggregate summary file.
  void write_csv(const std::string& dir, const std::string& prefix) const;
};

/// Per-slot interaction contract between the coordinator loop and one
/// user's decision logic.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual double request(const UserState& s, Rng& explore) = 0;
  virtual ScheduleAction schedule(const UserState& s, double x_hat) = 0;
  virtual void learn(const UserState& s, double x_hat, const ScheduleAction& y,
                     int h_next, const std::vector<int>& fresh_draws, double lambda,
                     Rng& explore) {}
  /// Averaged-softmax learners may request off-grid fractions.
  virtual bool off_grid_ok() const { return false; }
};

/// Requests the solved policy's x; reschedules exactly for the granted
/// fraction using the solved value table.
class ExactPolicyAgent : public Agent {
 public:
  ExactPolicyAgent(const StateSpace& space, SolveResult solved, double alpha);
  double request(const UserState& s, Rng&) override;
  ScheduleAction schedule(const UserState& s, double x_hat) override;

 private:
  const StateSpace* space_;
  SolveResult solved_;
  double alpha_;
};

class LearnerAgent : public Agent {
 public:
  LearnerAgent(const StateSpace& space, LearningConfig cfg, double alpha)
      : learner_(space, cfg, alpha) {}
  double request(const UserState& s, Rng& explore) override {
    return learner_.select_resource(s, explore);
  }
  ScheduleAction schedule(const UserState& s, double x_hat) override {
    return learner_.schedule(s, x_hat);
  }
  void learn(const UserState& s, double x_hat, const ScheduleAction& y, int h_next,
             const std::vector<int>& fresh_draws, double lambda, Rng& explore) override {
    learner_.associated_update(s, x_hat, y, h_next, fresh_draws, lambda, explore);
  }
  bool off_grid_ok() const override { return learner_.config().averaged_action; }
  Learner& learner() { return learner_; }
  const Learner& learner() const { return learner_; }

 private:
  Learner learner_;
};

/// Fixed allocation, highest-distortion-impact-first scheduling; a DU is
/// skipped once any in-window ancestor is useless.
class PriorityAgent : public Agent {
 public:
  PriorityAgent(const StateSpace& space, double fixed_x)
      : space_(&space), fixed_x_(fixed_x) {}
  double request(const UserState&, Rng&) override { return fixed_x_; }
  ScheduleAction schedule(const UserState& s, double x_hat) override;
  bool off_grid_ok() const override { return true; }

 private:
  const StateSpace* space_;
  double fixed_x_;
};

/// Dependency-respecting greedy fill by descending q at a given rate.
ScheduleAction priority_schedule(const StateSpace& space, const TrafficState& traffic,
                                 int rate_packets);

enum class PriceMode { Fixed, Stochastic };

struct EpisodeConfig {
  long long horizon = 10000;
  std::uint64_t seed = 1;
  double alpha = 0.9;
  double lambda0 = 0.0;
  PriceMode price_mode = PriceMode::Fixed;
  int price_period = 100;   // K
  double kappa0 = 0.1;
};

/// Drives the slot loop: observe -> request -> scale -> schedule ->
/// transition -> learn, with the price held fixed inside each K-slot
/// epoch.
MetricsLog run_episode(const std::vector<const StateSpace*>& spaces,
                       const std::vector<Agent*>& agents, const EpisodeConfig& cfg);

struct MyopicConfig {
  long long horizon = 10000;
  std::uint64_t seed = 1;
  double alpha = 0.9;       // metric discount only; decisions are myopic
  double dual_beta0 = 0.1;  // inner per-slot dual iteration
  double dual_tol = 1e-4;
  int dual_max_iters = 500;
};

/// Per-slot one-shot utility maximization over the x-grid simplex, solved
/// exactly by enumeration; also runs the per-slot scalar-price dual
/// variant and logs its iteration counts.
MetricsLog run_baseline_myopic(const std::vector<const StateSpace*>& spaces,
                               const MyopicConfig& cfg);

MetricsLog run_baseline_priority(const std::vector<const StateSpace*>& spaces,
                                 const std::vector<double>& fixed_x,
                                 const EpisodeConfig& cfg);

}  // namespace dagsched
