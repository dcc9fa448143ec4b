#include "dagsched/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace dagsched {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

int DuSpec::max_size() const {
  int m = 0;
  for (const auto& [count, p] : sizes)
    if (p > 0.0) m = std::max(m, count);
  return m;
}

const DuSpec& GopSpec::du(int id) const {
  for (const auto& d : dus)
    if (d.id == id) return d;
  fail("unknown du id " + std::to_string(id));
  return dus.front();  // unreachable
}

std::vector<int> GopSpec::ancestors_of(int id) const {
  std::set<int> seen{id};
  std::vector<int> stack{id};
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    for (int p : du(cur).parents)
      if (seen.insert(p).second) stack.push_back(p);
  }
  return {seen.begin(), seen.end()};
}

void GopSpec::validate() const {
  if (period < 1) fail("gop period must be positive");
  if (stw < 1) fail("stw must be positive");
  if (initial_deadline < 0) fail("initial_deadline must be nonnegative");
  if (dus.empty()) fail("gop has no dus");

  std::set<int> ids;
  for (const auto& d : dus) {
    if (d.id < 1 || d.id > static_cast<int>(dus.size()))
      fail("du ids must be 1..N, got " + std::to_string(d.id));
    if (!ids.insert(d.id).second) fail("duplicate du id " + std::to_string(d.id));
    if (d.q < 0.0) fail("du " + std::to_string(d.id) + ": q must be nonnegative");
    if (d.deadline < 0 || d.deadline > period)
      fail("du " + std::to_string(d.id) + ": deadline must be in [0, T]");
    if (d.loss_threshold < 1)
      fail("du " + std::to_string(d.id) + ": loss threshold must be positive");
    if (d.sizes.empty()) fail("du " + std::to_string(d.id) + ": empty size distribution");
    double total = 0.0;
    for (const auto& [count, p] : d.sizes) {
      if (count < 1) fail("du " + std::to_string(d.id) + ": size support must be >= 1");
      if (p < 0.0) fail("du " + std::to_string(d.id) + ": negative size probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      fail("du " + std::to_string(d.id) + ": size distribution does not sum to 1");
    for (int p : d.parents) {
      if (ids.count(p) == 0 && p == d.id) fail("du depends on itself");
      if (p < 1 || p > static_cast<int>(dus.size()))
        fail("du " + std::to_string(d.id) + ": unknown parent " + std::to_string(p));
    }
  }
  if (du(1).deadline != 0) fail("du 1 must have deadline 0");

  // acyclicity via repeated removal of parent-free nodes
  std::map<int, std::set<int>> rem;
  for (const auto& d : dus) rem[d.id] = {d.parents.begin(), d.parents.end()};
  while (!rem.empty()) {
    bool removed = false;
    for (auto it = rem.begin(); it != rem.end();) {
      bool free = true;
      for (int p : it->second)
        if (rem.count(p)) free = false;
      if (free) {
        it = rem.erase(it);
        removed = true;
      } else {
        ++it;
      }
    }
    if (!removed) fail("dependency graph has a cycle");
  }

  for (const auto& d : dus) {
    for (int p : d.parents) {
      const DuSpec& parent = du(p);
      if (d.deadline < parent.deadline)
        fail("du " + std::to_string(d.id) + ": deadline earlier than its parent");
      if (d.q > parent.q + 1e-12)
        fail("du " + std::to_string(d.id) + ": distortion impact exceeds its parent");
      if (d.deadline - parent.deadline >= stw)
        fail("du " + std::to_string(d.id) + ": deadline gap to parent " +
             std::to_string(p) + " violates the window condition");
    }
  }
}

int DependencyPattern::index_of(const DuInstance& inst) const {
  for (int i = 0; i < size(); ++i)
    if (instances[i] == inst) return i;
  return -1;
}

std::vector<DependencyPattern> pattern_sequence(const GopSpec& gop) {
  gop.validate();
  const int T = gop.period;
  const int W = gop.stw;
  std::vector<DependencyPattern> patterns(T);
  for (int t = 0; t < T; ++t) {
    DependencyPattern& pat = patterns[t];
    pat.phase = t;
    // absolute deadline of (j, g) is d0 + d_j + (g-1) T
    const int g_lo = (t - gop.initial_deadline - T) / T - 2;
    const int g_hi = (t + W + T) / T + 2;
    for (int g = g_lo; g <= g_hi; ++g) {
      for (const auto& d : gop.dus) {
        int abs_deadline = gop.initial_deadline + d.deadline + (g - 1) * T;
        if (abs_deadline >= t && abs_deadline < t + W)
          pat.instances.push_back({d.id, g});
      }
    }
    std::sort(pat.instances.begin(), pat.instances.end());
    if (pat.size() > 31) fail("dependency pattern wider than 31 instances");

    pat.ancestor_mask.assign(pat.size(), 0);
    for (int k = 0; k < pat.size(); ++k) {
      for (int a : gop.ancestors_of(pat.instances[k].du_id)) {
        int idx = pat.index_of({a, pat.instances[k].gop});
        if (idx >= 0) pat.ancestor_mask[k] |= 1u << idx;
      }
      for (int p : gop.du(pat.instances[k].du_id).parents) {
        int idx = pat.index_of({p, pat.instances[k].gop});
        if (idx >= 0) pat.arcs.emplace_back(k, idx);
      }
    }
  }
  return patterns;
}

std::vector<PatternStep> pattern_steps(const GopSpec& gop,
                                       const std::vector<DependencyPattern>& patterns) {
  const int T = gop.period;
  std::vector<PatternStep> steps(T);
  for (int t = 0; t < T; ++t) {
    const DependencyPattern& cur = patterns[t];
    const DependencyPattern& next = patterns[(t + 1) % T];
    const int shift = (t + 1 == T) ? 1 : 0;  // wrap: canonical gop indices lag by one
    PatternStep& step = steps[t];
    step.carried_from.assign(next.size(), PatternStep::kFresh);
    step.prev_ancestor_mask.assign(next.size(), 0);
    for (int k = 0; k < next.size(); ++k) {
      const int abs_gop = next.instances[k].gop + shift;
      step.carried_from[k] = cur.index_of({next.instances[k].du_id, abs_gop});
      for (int a : gop.ancestors_of(next.instances[k].du_id)) {
        int idx = cur.index_of({a, abs_gop});
        if (idx >= 0) step.prev_ancestor_mask[k] |= 1u << idx;
      }
    }
    for (int i = 0; i < cur.size(); ++i) {
      if (std::find(step.carried_from.begin(), step.carried_from.end(), i) ==
          step.carried_from.end())
        step.expiring.push_back(i);
    }
  }
  return steps;
}

namespace {

void enumerate_rec(const std::vector<int>& caps, int pos, int budget,
                   ScheduleAction& cur, std::vector<ScheduleAction>& out) {
  if (pos == static_cast<int>(caps.size())) {
    out.push_back(cur);
    return;
  }
  for (int y = 0; y <= std::min(caps[pos], budget); ++y) {
    cur[pos] = y;
    enumerate_rec(caps, pos + 1, budget - y, cur, out);
  }
  cur[pos] = 0;
}

}  // namespace

std::vector<ScheduleAction> feasible_schedules(const TrafficState& state,
                                               const DependencyPattern& pattern,
                                               int rate) {
  std::vector<int> caps(pattern.size());
  for (int i = 0; i < pattern.size(); ++i) caps[i] = std::max(state.buffers[i], 0);
  std::vector<ScheduleAction> out;
  ScheduleAction cur(pattern.size(), 0);
  enumerate_rec(caps, 0, std::max(rate, 0), cur, out);
  return out;
}

bool schedule_feasible(const TrafficState& state, const ScheduleAction& y, int rate) {
  if (y.size() != state.buffers.size()) return false;
  int total = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] > std::max(state.buffers[i], 0)) return false;
    total += y[i];
  }
  return total <= rate;
}

double utility(const GopSpec& gop, const DependencyPattern& pattern,
               const TrafficState& state, const ScheduleAction& y, int rate) {
  if (!schedule_feasible(state, y, rate))
    throw std::invalid_argument("infeasible schedule action");
  double u = 0.0;
  for (int i = 0; i < pattern.size(); ++i)
    u += gop.du(pattern.instances[i].du_id).q * y[i];
  return u;
}

namespace {

std::uint32_t marked_sources(const GopSpec& gop, const DependencyPattern& pattern,
                             const PatternStep& step, const TrafficState& state,
                             const ScheduleAction& y) {
  std::uint32_t mark = 0;
  for (int i : step.expiring) {
    int b = state.buffers[i];
    if (b >= 0 && b - y[i] >= gop.du(pattern.instances[i].du_id).loss_threshold)
      mark |= 1u << i;  // E_t: expires with too much data lost
  }
  for (int i = 0; i < pattern.size(); ++i) {
    bool expiring = std::find(step.expiring.begin(), step.expiring.end(), i) !=
                    step.expiring.end();
    if (!expiring && state.buffers[i] == -1) mark |= 1u << i;  // eps_t
  }
  return mark;
}

}  // namespace

std::vector<TrafficOutcome> transition(const GopSpec& gop,
                                       const std::vector<DependencyPattern>& patterns,
                                       const std::vector<PatternStep>& steps,
                                       const TrafficState& state,
                                       const ScheduleAction& y) {
  const int T = gop.period;
  const DependencyPattern& cur = patterns[state.phase % T];
  const DependencyPattern& next = patterns[(state.phase + 1) % T];
  const PatternStep& step = steps[state.phase % T];
  const std::uint32_t mark = marked_sources(gop, cur, step, state, y);

  std::vector<int> base(next.size(), 0);
  std::vector<int> fresh;  // next-pattern indices needing a size draw
  for (int k = 0; k < next.size(); ++k) {
    if (step.prev_ancestor_mask[k] & mark) {
      base[k] = -1;
    } else if (step.carried_from[k] != PatternStep::kFresh) {
      int i = step.carried_from[k];
      base[k] = state.buffers[i] - y[i];
    } else {
      fresh.push_back(k);
    }
  }

  std::vector<TrafficOutcome> out;
  out.push_back({base, 1.0});
  for (int k : fresh) {
    const DuSpec& d = gop.du(next.instances[k].du_id);
    std::vector<TrafficOutcome> expanded;
    expanded.reserve(out.size() * d.sizes.size());
    for (const auto& o : out) {
      for (const auto& [count, p] : d.sizes) {
        if (p <= 0.0) continue;
        TrafficOutcome e = o;
        e.buffers[k] = count;
        e.prob *= p;
        expanded.push_back(std::move(e));
      }
    }
    out = std::move(expanded);
  }
  return out;
}

std::vector<int> post_decision_buffers(const GopSpec& gop,
                                       const std::vector<DependencyPattern>& patterns,
                                       const std::vector<PatternStep>& steps,
                                       const TrafficState& state,
                                       const ScheduleAction& y) {
  const int T = gop.period;
  const DependencyPattern& cur = patterns[state.phase % T];
  const DependencyPattern& next = patterns[(state.phase + 1) % T];
  const PatternStep& step = steps[state.phase % T];
  const std::uint32_t mark = marked_sources(gop, cur, step, state, y);

  // -2 marks a fresh slot still to be drawn
  std::vector<int> pd(next.size(), -2);
  for (int k = 0; k < next.size(); ++k) {
    if (step.carried_from[k] == PatternStep::kFresh) continue;
    if (step.prev_ancestor_mask[k] & mark)
      pd[k] = -1;
    else
      pd[k] = state.buffers[step.carried_from[k]] - y[step.carried_from[k]];
  }
  return pd;
}

std::vector<int> apply_fresh_draws(const GopSpec& gop,
                                   const std::vector<DependencyPattern>& patterns,
                                   const std::vector<PatternStep>& steps,
                                   int phase,
                                   const std::vector<int>& post_decision,
                                   const std::vector<int>& fresh_draws) {
  const int T = gop.period;
  const DependencyPattern& next = patterns[(phase + 1) % T];
  std::uint32_t useless = 0;
  for (int k = 0; k < next.size(); ++k)
    if (post_decision[k] == -1) useless |= 1u << k;

  std::vector<int> buffers = post_decision;
  size_t draw = 0;
  for (int k = 0; k < next.size(); ++k) {
    if (buffers[k] != -2) continue;
    if (next.ancestor_mask[k] & useless) {
      buffers[k] = -1;
      useless |= 1u << k;
    } else {
      buffers[k] = fresh_draws.at(draw);
    }
    ++draw;
  }
  (void)steps;
  return buffers;
}

}  // namespace dagsched
