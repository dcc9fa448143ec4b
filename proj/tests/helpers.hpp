#pragma once

// Shared fixtures and independent brute-force oracles for the test suite.
// The oracles deliberately avoid the library's solver code paths: they
// recurse on `transition` and the channel rows directly.

#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "dagsched/config.hpp"
#include "dagsched/mdp.hpp"

namespace dagsched::testing {

inline GopSpec tiny_a_gop() {
  GopSpec gop;
  gop.period = 2;
  gop.stw = 2;
  gop.initial_deadline = 0;
  gop.dus = {
      {1, 3.0, 0, {{1, 0.5}, {2, 0.5}}, 1, {}},
      {2, 1.0, 1, {{1, 1.0}}, 1, {1}},
  };
  return gop;
}

inline ChannelSpec tiny_a_channel() {
  return {{10.0, 20.0}, {{0.7, 0.3}, {0.3, 0.7}}, {2, 4}};
}

inline std::vector<double> tiny_a_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

inline StateSpace tiny_a_space() {
  return StateSpace(tiny_a_gop(), tiny_a_channel(), tiny_a_grid());
}

// TINY-B: a heterogeneous two-user instance where foresight matters for
// user 1. DU 1 (X, q=5, 4 packets, d=0) monopolizes myopic attention in
// the slot where the one-packet parent DU 2 (P, q=3, d=0) expires; losing
// P makes the large child DU 3 (C, q=3, 4 packets, d=1) useless, and C's
// last window slot has no other user-1 traffic. User 2 is a light
// single-DU-per-slot source that keeps the channel contended.
inline GopSpec tiny_b_gop1() {
  GopSpec gop;
  gop.period = 3;
  gop.stw = 2;
  gop.initial_deadline = 0;
  gop.dus = {
      {1, 5.0, 0, {{6, 1.0}}, 1, {}},
      {2, 4.5, 0, {{1, 1.0}}, 1, {}},
      {3, 4.5, 1, {{4, 1.0}}, 1, {2}},
  };
  return gop;
}

// User 2's single DU is due at phase 1 of each GOP (initial_deadline 1,
// window 1 slot), i.e. exactly when user 1 has only the child C in window;
// outside that slot user 2 never competes for the channel.
inline GopSpec tiny_b_gop2() {
  GopSpec gop;
  gop.period = 3;
  gop.stw = 1;
  gop.initial_deadline = 1;
  gop.dus = {
      {1, 2.5, 0, {{1, 0.5}, {2, 0.5}}, 1, {}},
  };
  return gop;
}

inline ChannelSpec tiny_b_channel2() {
  return {{10.0, 20.0}, {{0.6, 0.4}, {0.4, 0.6}}, {2, 4}};
}

inline std::vector<double> tiny_b_grid() { return {0.0, 0.5, 1.0}; }

inline std::vector<StateSpace> tiny_b_spaces() {
  std::vector<StateSpace> out;
  out.emplace_back(tiny_b_gop1(), tiny_a_channel(), tiny_b_grid());
  out.emplace_back(tiny_b_gop2(), tiny_b_channel2(), tiny_b_grid());
  return out;
}

/// Finite-horizon brute force for one user's priced problem: the optimal
/// H-step reward-to-go from (phase, state), by direct recursion over
/// feasible (x, y) and the transition law. Independent of solve_local.
class FiniteHorizonOracle {
 public:
  FiniteHorizonOracle(const StateSpace& space, double lambda, double alpha,
                      double lambda_const)
      : space_(&space), lambda_(lambda), alpha_(alpha), lambda_const_(lambda_const) {}

  double value(int steps, int phase, const UserState& s) {
    if (steps == 0) return 0.0;
    const auto key = std::make_tuple(steps, phase,
                                     space_->traffic_index(phase, s.traffic.buffers),
                                     s.channel);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    const auto& pattern = space_->patterns()[phase];
    double best = -1e300;
    for (double x : space_->x_grid()) {
      const int r = rate(space_->channel(), s.channel, x);
      for (const auto& y : feasible_schedules(s.traffic, pattern, r)) {
        double u = 0.0;
        for (int i = 0; i < pattern.size(); ++i)
          u += space_->gop().du(pattern.instances[i].du_id).q * y[i];
        double cont = 0.0;
        if (steps > 1) {
          const int np = (phase + 1) % space_->period();
          for (const auto& o : transition(space_->gop(), space_->patterns(),
                                          space_->steps(), s.traffic, y)) {
            for (int h2 = 0; h2 < space_->num_channel_states(); ++h2) {
              const double p =
                  o.prob * space_->channel().transition[s.channel][h2];
              if (p <= 0.0) continue;
              UserState nxt{TrafficState{np, o.buffers}, h2};
              cont += p * value(steps - 1, np, nxt);
            }
          }
        }
        best = std::max(best, u - lambda_ * x + lambda_const_ + alpha_ * cont);
      }
    }
    memo_[key] = best;
    return best;
  }

 private:
  const StateSpace* space_;
  double lambda_, alpha_, lambda_const_;
  std::map<std::tuple<int, int, int, int>, double> memo_;
};

/// Finite-horizon brute force for the two-user stage-constrained joint
/// problem (sum x <= 1 per slot), independent of solve_joint.
class JointFiniteHorizonOracle {
 public:
  JointFiniteHorizonOracle(const StateSpace& a, const StateSpace& b, double alpha)
      : a_(&a), b_(&b), alpha_(alpha) {}

  // `phase` is the joint phase modulo lcm(periods); each user's pattern is
  // looked up at phase mod its own period.
  double value(int steps, int phase, const UserState& sa, const UserState& sb) {
    if (steps == 0) return 0.0;
    const int fa = phase % a_->period();
    const int fb = phase % b_->period();
    const auto key = std::make_tuple(
        steps, phase, a_->traffic_index(fa, sa.traffic.buffers), sa.channel,
        b_->traffic_index(fb, sb.traffic.buffers), sb.channel);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    const auto& pa = a_->patterns()[fa];
    const auto& pb = b_->patterns()[fb];
    double best = -1e300;
    for (double xa : a_->x_grid()) {
      for (double xb : b_->x_grid()) {
        if (xa + xb > 1.0 + 1e-9) continue;
        const int ra = rate(a_->channel(), sa.channel, xa);
        const int rb = rate(b_->channel(), sb.channel, xb);
        for (const auto& ya : feasible_schedules(sa.traffic, pa, ra)) {
          double ua = 0.0;
          for (int i = 0; i < pa.size(); ++i)
            ua += a_->gop().du(pa.instances[i].du_id).q * ya[i];
          for (const auto& yb : feasible_schedules(sb.traffic, pb, rb)) {
            double u = ua;
            for (int i = 0; i < pb.size(); ++i)
              u += b_->gop().du(pb.instances[i].du_id).q * yb[i];
            double cont = 0.0;
            if (steps > 1) {
              const int np = (phase + 1) % std::lcm(a_->period(), b_->period());
              const auto oa = transition(a_->gop(), a_->patterns(), a_->steps(),
                                         sa.traffic, ya);
              const auto ob = transition(b_->gop(), b_->patterns(), b_->steps(),
                                         sb.traffic, yb);
              for (const auto& o1 : oa)
                for (int h1 = 0; h1 < a_->num_channel_states(); ++h1) {
                  const double p1 =
                      o1.prob * a_->channel().transition[sa.channel][h1];
                  if (p1 <= 0.0) continue;
                  for (const auto& o2 : ob)
                    for (int h2 = 0; h2 < b_->num_channel_states(); ++h2) {
                      const double p = p1 * o2.prob *
                                       b_->channel().transition[sb.channel][h2];
                      if (p <= 0.0) continue;
                      cont += p * value(
                          steps - 1, np,
                          {TrafficState{np % a_->period(), o1.buffers}, h1},
                          {TrafficState{np % b_->period(), o2.buffers}, h2});
                    }
                }
            }
            best = std::max(best, u + alpha_ * cont);
          }
        }
      }
    }
    memo_[key] = best;
    return best;
  }

 private:
  const StateSpace* a_;
  const StateSpace* b_;
  double alpha_;
  std::map<std::tuple<int, int, int, int, int, int>, double> memo_;
};

}  // namespace dagsched::testing
