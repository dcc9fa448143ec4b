#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"

using namespace dagsched;
using dagsched::testing::tiny_a_gop;

namespace {

GopSpec single_du_gop() {
  GopSpec gop;
  gop.period = 1;
  gop.stw = 1;
  gop.dus = {{1, 1.0, 0, {{1, 1.0}}, 1, {}}};
  return gop;
}

GopSpec figure1_gop() {
  // IBPBP-shaped GOP: DUs 1..3 at the GOP head, 4..5 one period later.
  GopSpec gop;
  gop.period = 2;
  gop.stw = 2;
  gop.dus = {
      {1, 8.0, 0, {{1, 1.0}}, 1, {}},
      {2, 4.0, 0, {{1, 1.0}}, 1, {1}},
      {3, 2.0, 0, {{1, 1.0}}, 1, {1, 2}},
      {4, 5.0, 2, {{1, 1.0}}, 1, {}},
      {5, 2.0, 2, {{1, 1.0}}, 1, {4}},
  };
  return gop;
}

}  // namespace

TEST_CASE("tiny-a pattern sequence") {
  const auto patterns = pattern_sequence(tiny_a_gop());
  REQUIRE(patterns.size() == 2);
  // phase 0: {1_g, 2_g}
  REQUIRE(patterns[0].instances.size() == 2);
  CHECK(patterns[0].instances[0] == DuInstance{1, 1});
  CHECK(patterns[0].instances[1] == DuInstance{2, 1});
  // phase 1: {2_g, 1_{g+1}}
  REQUIRE(patterns[1].instances.size() == 2);
  CHECK(patterns[1].instances[0] == DuInstance{2, 1});
  CHECK(patterns[1].instances[1] == DuInstance{1, 2});
  // arc 2_g -> 1_g only in phase 0 (no cross-gop arcs)
  REQUIRE(patterns[0].arcs.size() == 1);
  CHECK(patterns[0].arcs[0] == std::pair<int, int>{1, 0});
  CHECK(patterns[1].arcs.empty());
}

TEST_CASE("figure-1 shaped gop") {
  const auto patterns = pattern_sequence(figure1_gop());
  REQUIRE(patterns.size() == 2);
  // the GOP head: exactly {1_g, 2_g, 3_g} plus the previous GOP's tail
  const auto& p0 = patterns[0];
  CHECK(p0.index_of({1, 1}) >= 0);
  CHECK(p0.index_of({2, 1}) >= 0);
  CHECK(p0.index_of({3, 1}) >= 0);
  // one slot later the window holds {4_g, 5_g, 1_{g+1}, ...}
  const auto& p1 = patterns[1];
  const int i4 = p1.index_of({4, 1});
  const int i5 = p1.index_of({5, 1});
  CHECK(i4 >= 0);
  CHECK(i5 >= 0);
  CHECK(p1.index_of({1, 2}) >= 0);
  // 5_g depends on 4_g; arcs never cross GOP boundaries
  CHECK(std::count(p1.arcs.begin(), p1.arcs.end(), std::pair<int, int>{i5, i4}) == 1);
  for (const auto& [child, parent] : p1.arcs)
    CHECK(p1.instances[child].gop == p1.instances[parent].gop);
}

TEST_CASE("single du degenerate period") {
  const auto patterns = pattern_sequence(single_du_gop());
  REQUIRE(patterns.size() == 1);
  REQUIRE(patterns[0].instances.size() == 1);
  CHECK(patterns[0].instances[0].du_id == 1);
  const auto steps = pattern_steps(single_du_gop(), patterns);
  // period-1 wrap shifts the gop index: the single slot is always fresh
  CHECK(steps[0].carried_from[0] == PatternStep::kFresh);
}

TEST_CASE("stw arc condition rejected") {
  GopSpec gop = tiny_a_gop();
  gop.stw = 1;  // arc 2 -> 1 has deadline gap 1, needs W > 1
  CHECK_THROWS_AS(gop.validate(), std::invalid_argument);
}

TEST_CASE("feasible schedules") {
  const auto patterns = pattern_sequence(tiny_a_gop());
  TrafficState st{0, {2, 1}};

  SUBCASE("zero rate") {
    const auto fs = feasible_schedules(st, patterns[0], 0);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0] == ScheduleAction{0, 0});
  }
  SUBCASE("rate 2") {
    const auto fs = feasible_schedules(st, patterns[0], 2);
    const std::set<ScheduleAction> expect{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}};
    CHECK(std::set<ScheduleAction>(fs.begin(), fs.end()) == expect);
    CHECK(std::is_sorted(fs.begin(), fs.end()));
  }
  SUBCASE("useless pinned to zero") {
    TrafficState useless{0, {-1, 1}};
    const auto fs = feasible_schedules(useless, patterns[0], 5);
    const std::set<ScheduleAction> expect{{0, 0}, {0, 1}};
    CHECK(std::set<ScheduleAction>(fs.begin(), fs.end()) == expect);
  }
}

TEST_CASE("utility") {
  const auto gop = tiny_a_gop();
  const auto patterns = pattern_sequence(gop);
  CHECK(utility(gop, patterns[0], {0, {2, 1}}, {2, 1}, 3) == doctest::Approx(7.0));
  CHECK(utility(gop, patterns[0], {0, {2, 1}}, {0, 0}, 3) == doctest::Approx(0.0));
  CHECK(utility(gop, patterns[0], {0, {-1, 1}}, {0, 1}, 3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(utility(gop, patterns[0], {0, {2, 1}}, {2, 1}, 2),
                  std::invalid_argument);
}

TEST_CASE("tiny-a transitions match hand-applied eq. 1") {
  const auto gop = tiny_a_gop();
  const auto patterns = pattern_sequence(gop);
  const auto steps = pattern_steps(gop, patterns);

  SUBCASE("clean carryover plus fresh draw") {
    // t=0, b=(2,1), y=(2,0): 2_g carries 1 packet, 1_{g+1} drawn fresh
    const auto out = transition(gop, patterns, steps, {0, {2, 1}}, {2, 0});
    REQUIRE(out.size() == 2);
    std::map<std::vector<int>, double> dist;
    for (const auto& o : out) dist[o.buffers] += o.prob;
    CHECK(dist[{1, 1}] == doctest::Approx(0.5));
    CHECK(dist[{1, 2}] == doctest::Approx(0.5));
  }
  SUBCASE("badly expiring du marks its descendant") {
    // t=0, b=(2,1), y=(1,0): DU1 leaves with 1 >= V, 2_g becomes useless
    const auto out = transition(gop, patterns, steps, {0, {2, 1}}, {1, 0});
    std::map<std::vector<int>, double> dist;
    for (const auto& o : out) dist[o.buffers] += o.prob;
    CHECK(dist[{-1, 1}] == doctest::Approx(0.5));
    CHECK(dist[{-1, 2}] == doctest::Approx(0.5));
  }
  SUBCASE("point-mass sizes give a point-mass transition") {
    // t=1: only DU2's size (point mass at 1) is drawn
    const auto out = transition(gop, patterns, steps, {1, {1, 2}}, {1, 2});
    REQUIRE(out.size() == 1);
    CHECK(out[0].prob == doctest::Approx(1.0));
    // 1_{g+1} drains to 0 and carries; 2_{g+1} enters with its point-mass size 1
    CHECK(out[0].buffers == std::vector<int>{0, 1});
  }
}

TEST_CASE("transition probabilities sum to one for every (state, y)") {
  const StateSpace space = testing::tiny_a_space();
  for (int p = 0; p < space.period(); ++p) {
    for (int tid = 0; tid < space.num_traffic_states(p); ++tid) {
      const TrafficState st{p, space.traffic_buffers(p, tid)};
      for (const auto& y : feasible_schedules(st, space.patterns()[p], 100)) {
        const auto out = transition(space.gop(), space.patterns(), space.steps(), st, y);
        double total = 0.0;
        for (const auto& o : out) {
          CHECK(o.prob >= 0.0);
          total += o.prob;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("transition is a pure function of (state, y)") {
  const auto gop = tiny_a_gop();
  const auto patterns = pattern_sequence(gop);
  const auto steps = pattern_steps(gop, patterns);
  const auto a = transition(gop, patterns, steps, {0, {2, 1}}, {1, 1});
  // unrelated calls in between must not change the answer
  (void)transition(gop, patterns, steps, {1, {-1, 2}}, {0, 0});
  const auto b = transition(gop, patterns, steps, {0, {2, 1}}, {1, 1});
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].buffers == b[i].buffers);
    CHECK(a[i].prob == b[i].prob);
  }
}

TEST_CASE("pattern periodicity up to gop shift") {
  for (const auto& gop : {tiny_a_gop(), figure1_gop()}) {
    const auto patterns = pattern_sequence(gop);
    const auto steps = pattern_steps(gop, patterns);
    // following carried_from around one full period returns every instance
    // to an equivalent slot with the gop index advanced by one
    for (int p = 0; p < gop.period; ++p) {
      const auto& next = patterns[(p + 1) % gop.period];
      const int shift = (p + 1 == gop.period) ? 1 : 0;
      for (int k = 0; k < next.size(); ++k) {
        const int from = steps[p].carried_from[k];
        if (from == PatternStep::kFresh) continue;
        CHECK(patterns[p].instances[from].du_id == next.instances[k].du_id);
        CHECK(patterns[p].instances[from].gop == next.instances[k].gop + shift);
      }
    }
  }
}

TEST_CASE("utility additivity") {
  const auto gop = tiny_a_gop();
  const auto patterns = pattern_sequence(gop);
  const TrafficState st{0, {2, 1}};
  const double both = utility(gop, patterns[0], st, {1, 1}, 4);
  const double a = utility(gop, patterns[0], st, {1, 0}, 4);
  const double b = utility(gop, patterns[0], st, {0, 1}, 4);
  CHECK(both == doctest::Approx(a + b));
}

TEST_CASE("monotone uselessness") {
  const auto gop = tiny_a_gop();
  const auto patterns = pattern_sequence(gop);
  const auto steps = pattern_steps(gop, patterns);
  // 2_g is useless at phase 1 and carried into phase 0 of the next gop:
  // wait, at phase 1 pattern is {2_g, 1_{g+1}}; 2_g expires, 1_{g+1} carries.
  // A useless carried instance stays useless in every successor.
  const auto out = transition(gop, patterns, steps, {0, {2, -1}}, {0, 0});
  for (const auto& o : out) CHECK(o.buffers[0] == -1);  // 2_g stays marked
}

TEST_CASE("post-decision reconstruction reproduces the transition law") {
  const StateSpace space = testing::tiny_a_space();
  const auto& gop = space.gop();
  for (int p = 0; p < space.period(); ++p) {
    const auto& next = space.patterns()[(p + 1) % space.period()];
    for (int tid = 0; tid < space.num_traffic_states(p); ++tid) {
      const TrafficState st{p, space.traffic_buffers(p, tid)};
      for (const auto& y : feasible_schedules(st, space.patterns()[p], 100)) {
        std::map<std::vector<int>, double> expect;
        for (const auto& o : transition(gop, space.patterns(), space.steps(), st, y))
          expect[o.buffers] += o.prob;

        // reconstruct: pd + every fresh-draw combination (positional, one
        // draw per fresh slot regardless of marking)
        const auto pd = post_decision_buffers(gop, space.patterns(), space.steps(),
                                              st, y);
        std::vector<int> fresh_slots;
        for (int k = 0; k < next.size(); ++k)
          if (space.steps()[p].carried_from[k] == PatternStep::kFresh)
            fresh_slots.push_back(k);
        std::map<std::vector<int>, double> got;
        std::vector<int> draws(fresh_slots.size());
        std::function<void(size_t, double)> rec = [&](size_t pos, double prob) {
          if (pos == fresh_slots.size()) {
            got[apply_fresh_draws(gop, space.patterns(), space.steps(), p, pd, draws)] +=
                prob;
            return;
          }
          const DuSpec& d = gop.du(next.instances[fresh_slots[pos]].du_id);
          for (const auto& [count, pr] : d.sizes) {
            if (pr <= 0.0) continue;
            draws[pos] = count;
            rec(pos + 1, prob * pr);
          }
        };
        rec(0, 1.0);

        REQUIRE(got.size() == expect.size());
        for (const auto& [buffers, prob] : expect) {
          REQUIRE(got.count(buffers) == 1);
          CHECK(got[buffers] == doctest::Approx(prob).epsilon(1e-12));
        }
      }
    }
  }
}
