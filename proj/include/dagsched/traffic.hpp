#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagsched {

/// One data unit of the periodic GOP-structured stream.
struct DuSpec {
  int id = 0;                 // 1..N, unique within the GOP
  double q = 0.0;             // distortion impact per packet
  int deadline = 0;           // relative deadline d_j in slots, d_1 = 0
  std::vector<std::pair<int, double>> sizes;  // (packet count, probability)
  int loss_threshold = 1;     // V_j: leftover >= V_j makes descendants useless
  std::vector<int> parents;   // direct dependencies (du ids)

  int max_size() const;
};

/// Static description of one GOP: DU attributes, DAG, timing.
struct GopSpec {
  int period = 1;            // T, slots per GOP
  int stw = 1;               // W, scheduling time window
  int initial_deadline = 0;  // d_0, deadline of DU 1 in the first GOP

  std::vector<DuSpec> dus;

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  const DuSpec& du(int id) const;
  /// Transitive ancestor ids of `id`, including `id` itself.
  std::vector<int> ancestors_of(int id) const;
};

/// One DU instance inside a scheduling window: DU id plus GOP index.
struct DuInstance {
  int du_id = 0;
  int gop = 0;  // gop index relative to the pattern's base slot

  friend bool operator==(const DuInstance&, const DuInstance&) = default;
  /// Canonical pattern order: by gop index first, then du id.
  friend bool operator<(const DuInstance& a, const DuInstance& b) {
    return a.gop != b.gop ? a.gop < b.gop : a.du_id < b.du_id;
  }
};

/// The set of DU instances whose deadlines fall in [t, t+W), with the
/// dependency arcs induced by the GOP DAG (no cross-GOP arcs). Instances
/// are ordered by (gop, du_id) so buffer vectors are comparable.
struct DependencyPattern {
  int phase = 0;  // t mod T of the base slot
  std::vector<DuInstance> instances;
  /// arcs[a] = (child index, parent index) within `instances`
  std::vector<std::pair<int, int>> arcs;
  /// ancestor_mask[k]: bit i set iff instance i is a (transitive) ancestor
  /// of instance k, including k itself. Within one gop only.
  std::vector<std::uint32_t> ancestor_mask;

  int size() const { return static_cast<int>(instances.size()); }
  int index_of(const DuInstance& inst) const;  // -1 if absent
};

/// Per-instance remaining packets; -1 marks a useless instance.
struct TrafficState {
  int phase = 0;
  std::vector<int> buffers;

  friend bool operator==(const TrafficState&, const TrafficState&) = default;
};

using ScheduleAction = std::vector<int>;  // packets sent per instance

/// D[k] maps instance k of pattern (p+1) mod T back to its index in
/// pattern p, or kFresh if it enters the window at the next slot.
struct PatternStep {
  static constexpr int kFresh = -1;
  std::vector<int> carried_from;
  /// Indices in the current pattern that leave the window at this step.
  std::vector<int> expiring;
  /// For each next-pattern instance: ancestor mask over *current* pattern
  /// indices (transitive, same gop, including the instance itself when it
  /// is carried over). Drives the useless-marking branch of the transition.
  std::vector<std::uint32_t> prev_ancestor_mask;
};

/// G_0..G_{T-1}; G_{t+T} equals G_t with gop indices shifted by one.
std::vector<DependencyPattern> pattern_sequence(const GopSpec& gop);

/// Carryover maps between consecutive patterns (phase p -> (p+1) mod T,
/// with the gop shift folded in at the wrap).
std::vector<PatternStep> pattern_steps(const GopSpec& gop,
                                       const std::vector<DependencyPattern>& patterns);

/// All integer vectors satisfying the underflow and rate constraints;
/// useless instances pinned to 0. Lexicographically sorted.
std::vector<ScheduleAction> feasible_schedules(const TrafficState& state,
                                               const DependencyPattern& pattern,
                                               int rate);

bool schedule_feasible(const TrafficState& state, const ScheduleAction& y, int rate);

/// Distortion reduction sum q_j * y_j. Throws on infeasible y.
double utility(const GopSpec& gop, const DependencyPattern& pattern,
               const TrafficState& state, const ScheduleAction& y, int rate);

struct TrafficOutcome {
  std::vector<int> buffers;  // buffers of the next traffic state
  double prob = 1.0;
};

/// One-slot traffic transition: marks descendants of badly-expiring or
/// already-useless DUs, carries surviving buffers, and draws fresh sizes.
/// Probabilities sum to 1.
std::vector<TrafficOutcome> transition(const GopSpec& gop,
                                       const std::vector<DependencyPattern>& patterns,
                                       const std::vector<PatternStep>& steps,
                                       const TrafficState& state,
                                       const ScheduleAction& y);

/// Post-decision carryover buffers: b_j - y_j for instances surviving into
/// the next window, with the deterministic useless-marking already applied.
/// Together with the realized next channel state and fresh draws this
/// determines the next state exactly.
std::vector<int> post_decision_buffers(const GopSpec& gop,
                                       const std::vector<DependencyPattern>& patterns,
                                       const std::vector<PatternStep>& steps,
                                       const TrafficState& state,
                                       const ScheduleAction& y);

/// Completes a post-decision state into the next traffic buffers given
/// realized fresh-DU draws (indexed per next-pattern fresh slot).
std::vector<int> apply_fresh_draws(const GopSpec& gop,
                                   const std::vector<DependencyPattern>& patterns,
                                   const std::vector<PatternStep>& steps,
                                   int phase,
                                   const std::vector<int>& post_decision,
                                   const std::vector<int>& fresh_draws);

}  // namespace dagsched
