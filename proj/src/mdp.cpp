#include "dagsched/mdp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace dagsched {

StateSpace::StateSpace(GopSpec gop, ChannelSpec chan, std::vector<double> x_grid,
                       long long budget)
    : gop_(std::move(gop)), chan_(std::move(chan)), x_grid_(std::move(x_grid)) {
  gop_.validate();
  chan_.validate();
  ResourceActionSet{x_grid_}.validate();
  patterns_ = pattern_sequence(gop_);
  steps_ = pattern_steps(gop_, patterns_);

  radices_.resize(period());
  traffic_counts_.resize(period());
  long long total = 0;
  for (int p = 0; p < period(); ++p) {
    long long count = 1;
    for (const auto& inst : patterns_[p].instances) {
      radices_[p].push_back(gop_.du(inst.du_id).max_size() + 2);
      count *= radices_[p].back();
    }
    traffic_counts_[p] = static_cast<int>(count);
    total += count * chan_.num_states();
    if (total > budget) {
      // finish the count so the error reports the full size
      long long full = 0;
      for (int q = 0; q < period(); ++q) {
        long long c = 1;
        for (const auto& inst : patterns_[q].instances)
          c *= gop_.du(inst.du_id).max_size() + 2;
        full += c * chan_.num_states();
      }
      throw StateBudgetError(full, budget);
    }
  }
}

long long StateSpace::total_states() const {
  long long total = 0;
  for (int p = 0; p < period(); ++p) total += num_states(p);
  return total;
}

int StateSpace::traffic_index(int phase, const std::vector<int>& buffers) const {
  int idx = 0;
  for (size_t i = 0; i < buffers.size(); ++i)
    idx = idx * radices_[phase][i] + (buffers[i] + 1);
  return idx;
}

std::vector<int> StateSpace::traffic_buffers(int phase, int traffic_idx) const {
  std::vector<int> buffers(radices_[phase].size());
  for (int i = static_cast<int>(buffers.size()) - 1; i >= 0; --i) {
    buffers[i] = traffic_idx % radices_[phase][i] - 1;
    traffic_idx /= radices_[phase][i];
  }
  return buffers;
}

UserState StateSpace::state(int phase, int state_idx) const {
  return {TrafficState{phase, traffic_buffers(phase, traffic_of(state_idx))},
          channel_of(state_idx)};
}

std::vector<UserState> StateSpace::enumerate_states(int phase) const {
  std::vector<UserState> out;
  out.reserve(num_states(phase));
  for (int s = 0; s < num_states(phase); ++s) out.push_back(state(phase, s));
  return out;
}

ActionCache::ActionCache(const StateSpace& space) {
  const int T = space.period();
  actions_.resize(T);
  for (int p = 0; p < T; ++p) {
    actions_[p].resize(space.num_states(p));
    for (int s = 0; s < space.num_states(p); ++s) {
      const UserState st = space.state(p, s);
      auto& list = actions_[p][s];
      for (int xi = 0; xi < static_cast<int>(space.x_grid().size()); ++xi) {
        const double x = space.x_grid()[xi];
        const int r = rate(space.channel(), st.channel, x);
        for (auto& y : feasible_schedules(st.traffic, space.patterns()[p], r)) {
          CachedAction a;
          a.x_idx = xi;
          a.x = x;
          a.util = utility(space.gop(), space.patterns()[p], st.traffic, y, r);
          for (const auto& o :
               transition(space.gop(), space.patterns(), space.steps(), st.traffic, y))
            a.next_traffic.emplace_back(space.traffic_index((p + 1) % T, o.buffers),
                                        o.prob);
          a.y = std::move(y);
          list.push_back(std::move(a));
        }
      }
    }
  }
}

namespace {

/// chan-mixed continuation values: mix[tid'][h] = sum_h' p(h'|h) V[tid'*H+h'].
std::vector<std::vector<double>> mix_channel(const StateSpace& space, int next_phase,
                                             const std::vector<double>& next_values) {
  const int H = space.num_channel_states();
  const int nt = space.num_traffic_states(next_phase);
  std::vector<std::vector<double>> mix(nt, std::vector<double>(H, 0.0));
  for (int tid = 0; tid < nt; ++tid)
    for (int h = 0; h < H; ++h) {
      double acc = 0.0;
      for (int h2 = 0; h2 < H; ++h2)
        acc += space.channel().transition[h][h2] * next_values[tid * H + h2];
      mix[tid][h] = acc;
    }
  return mix;
}

}  // namespace

SolveResult solve_local(const StateSpace& space, const ActionCache& cache,
                        double lambda, double alpha, int num_users,
                        const SolveOptions& opts) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("alpha must be in [0, 1)");
  const int T = space.period();
  const double lambda_const = num_users >= 2 ? lambda / num_users : 0.0;

  std::vector<std::vector<double>> v(T), nv(T);
  for (int p = 0; p < T; ++p) {
    v[p].assign(space.num_states(p), 0.0);
    nv[p] = v[p];
  }

  double residual = 0.0;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    residual = 0.0;
    for (int p = 0; p < T; ++p) {
      const auto mix = mix_channel(space, (p + 1) % T, v[(p + 1) % T]);
      for (int s = 0; s < space.num_states(p); ++s) {
        const int h = space.channel_of(s);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& a : cache.at(p, s)) {
          if (opts.forced_x_idx >= 0 && a.x_idx != opts.forced_x_idx) continue;
          double cont = 0.0;
          for (const auto& [tid, prob] : a.next_traffic) cont += prob * mix[tid][h];
          double val = a.util - lambda * a.x + lambda_const + alpha * cont;
          if (val > best) best = val;
        }
        nv[p][s] = best;
        residual = std::max(residual, std::abs(best - v[p][s]));
      }
    }
    std::swap(v, nv);
    if (residual <= opts.tol) break;
  }
  if (residual > opts.tol)
    throw std::runtime_error("value iteration did not converge; residual " +
                             std::to_string(residual));

  SolveResult res;
  res.values.v = v;
  res.iterations = iter + 1;
  res.residual = residual;
  res.policy.x_idx.resize(T);
  res.policy.y.resize(T);
  for (int p = 0; p < T; ++p) {
    const auto mix = mix_channel(space, (p + 1) % T, v[(p + 1) % T]);
    res.policy.x_idx[p].resize(space.num_states(p));
    res.policy.y[p].resize(space.num_states(p));
    for (int s = 0; s < space.num_states(p); ++s) {
      const int h = space.channel_of(s);
      double best = -std::numeric_limits<double>::infinity();
      const CachedAction* arg = nullptr;
      for (const auto& a : cache.at(p, s)) {
        if (opts.forced_x_idx >= 0 && a.x_idx != opts.forced_x_idx) continue;
        double cont = 0.0;
        for (const auto& [tid, prob] : a.next_traffic) cont += prob * mix[tid][h];
        double val = a.util - lambda * a.x + lambda_const + alpha * cont;
        if (val > best) {
          best = val;
          arg = &a;
        }
      }
      res.policy.x_idx[p][s] = arg->x_idx;
      res.policy.y[p][s] = arg->y;
    }
  }
  return res;
}

std::vector<double> initial_distribution(const StateSpace& space) {
  const int H = space.num_channel_states();
  const auto& pattern = space.patterns()[0];
  std::vector<double> v0(space.num_states(0), 0.0);
  for (int tid = 0; tid < space.num_traffic_states(0); ++tid) {
    const auto buffers = space.traffic_buffers(0, tid);
    double prob = 1.0;
    for (int i = 0; i < pattern.size(); ++i) {
      const DuSpec& d = space.gop().du(pattern.instances[i].du_id);
      double pi = 0.0;
      for (const auto& [count, p] : d.sizes)
        if (count == buffers[i]) pi += p;
      prob *= pi;
      if (prob == 0.0) break;
    }
    if (prob == 0.0) continue;
    for (int h = 0; h < H; ++h) v0[space.state_index(0, tid, h)] = prob / H;
  }
  return v0;
}

double expect_initial(const std::vector<double>& v0,
                      const std::vector<double>& phase0_values) {
  double acc = 0.0;
  for (size_t i = 0; i < v0.size(); ++i) acc += v0[i] * phase0_values[i];
  return acc;
}

EvalResult evaluate_policy(
    const StateSpace& space, const PolicyFn& policy, double alpha,
    const std::function<double(int, int, double, const ScheduleAction&)>& reward,
    const std::vector<double>& v0) {
  const int T = space.period();
  std::vector<int> offset(T + 1, 0);
  for (int p = 0; p < T; ++p) offset[p + 1] = offset[p] + space.num_states(p);
  const int n = offset[T];

  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r(n);
  for (int p = 0; p < T; ++p) {
    for (int s = 0; s < space.num_states(p); ++s) {
      const UserState st = space.state(p, s);
      auto [x, y] = policy(p, s);
      const int rt = rate(space.channel(), st.channel, x);
      if (!schedule_feasible(st.traffic, y, rt))
        throw std::invalid_argument("policy schedule infeasible at its own state");
      r(offset[p] + s) = reward(p, s, x, y);
      const auto outcomes =
          transition(space.gop(), space.patterns(), space.steps(), st.traffic, y);
      const int np = (p + 1) % T;
      for (const auto& o : outcomes) {
        const int tid = space.traffic_index(np, o.buffers);
        for (int h2 = 0; h2 < space.num_channel_states(); ++h2) {
          const double prob = o.prob * space.channel().transition[st.channel][h2];
          if (prob > 0.0)
            A(offset[p] + s, offset[np] + space.state_index(np, tid, h2)) -=
                alpha * prob;
        }
      }
    }
  }

  Eigen::VectorXd sol = A.partialPivLu().solve(r);
  EvalResult out;
  out.residual = (A * sol - r).lpNorm<Eigen::Infinity>();
  out.values.v.resize(T);
  for (int p = 0; p < T; ++p) {
    out.values.v[p].resize(space.num_states(p));
    for (int s = 0; s < space.num_states(p); ++s)
      out.values.v[p][s] = sol(offset[p] + s);
  }
  out.initial_value = expect_initial(v0, out.values.v[0]);
  return out;
}

EvalResult evaluate_policy_priced(const StateSpace& space, const PolicyFn& policy,
                                  double alpha, double lambda, double lambda_const,
                                  const std::vector<double>& v0) {
  return evaluate_policy(
      space, policy, alpha,
      [&](int p, int s, double x, const ScheduleAction& y) {
        const UserState st = space.state(p, s);
        const int rt = rate(space.channel(), st.channel, x);
        return utility(space.gop(), space.patterns()[p], st.traffic, y, rt) -
               lambda * x + lambda_const;
      },
      v0);
}

PolicyFn policy_fn(const StateSpace& space, const LocalPolicy& policy) {
  return [&space, policy](int p, int s) {
    return std::make_pair(space.x_grid()[policy.x_idx[p][s]], policy.y[p][s]);
  };
}

double exact_pd_value(const StateSpace& space, const ValueTable& values, int phase,
                      const std::vector<int>& pd, int h) {
  const int T = space.period();
  const int np = (phase + 1) % T;
  const auto& next = space.patterns()[np];

  // enumerate the fresh-size product distribution positionally
  std::vector<int> fresh_slots;
  for (int k = 0; k < next.size(); ++k)
    if (pd[k] == -2) fresh_slots.push_back(k);

  double acc = 0.0;
  std::vector<int> draws(fresh_slots.size(), 0);
  std::function<void(size_t, double)> rec = [&](size_t pos, double prob) {
    if (pos == fresh_slots.size()) {
      const auto buffers =
          apply_fresh_draws(space.gop(), space.patterns(), space.steps(), phase, pd, draws);
      const int tid = space.traffic_index(np, buffers);
      for (int h2 = 0; h2 < space.num_channel_states(); ++h2)
        acc += prob * space.channel().transition[h][h2] *
               values.v[np][space.state_index(np, tid, h2)];
      return;
    }
    const DuSpec& d = space.gop().du(next.instances[fresh_slots[pos]].du_id);
    for (const auto& [count, p] : d.sizes) {
      if (p <= 0.0) continue;
      draws[pos] = count;
      rec(pos + 1, prob * p);
    }
  };
  rec(0, 1.0);
  return acc;
}

// ---------------------------------------------------------------------------

JointSpace::JointSpace(std::vector<const StateSpace*> users, long long budget)
    : users_(std::move(users)) {
  period_ = 1;
  for (const auto* u : users_) period_ = std::lcm(period_, u->period());
  counts_.resize(period_);
  long long total = 0;
  for (int p = 0; p < period_; ++p) {
    long long c = 1;
    for (size_t i = 0; i < users_.size(); ++i)
      c *= users_[i]->num_states(p % users_[i]->period());
    total += c;
    if (total > budget) throw StateBudgetError(total, budget);
    counts_[p] = static_cast<int>(c);
  }
}

std::vector<int> JointSpace::split(int phase, int joint_idx) const {
  std::vector<int> per_user(users_.size());
  for (int i = static_cast<int>(users_.size()) - 1; i >= 0; --i) {
    const int n = users_[i]->num_states(user_phase(i, phase));
    per_user[i] = joint_idx % n;
    joint_idx /= n;
  }
  return per_user;
}

int JointSpace::join(int phase, const std::vector<int>& per_user) const {
  int idx = 0;
  for (size_t i = 0; i < users_.size(); ++i)
    idx = idx * users_[i]->num_states(user_phase(static_cast<int>(i), phase)) +
          per_user[i];
  return idx;
}

namespace {

struct JointAction {
  double reward = 0.0;  // sum of per-user priced rewards
  std::vector<int> x_idx;
  std::vector<ScheduleAction> y;
  std::vector<std::pair<int, double>> next;  // (joint next idx, prob)
};

/// Per-user successor distributions with the channel folded in.
struct UserActionFull {
  const CachedAction* action;
  std::vector<std::pair<int, double>> next;  // full next-state indices
};

std::vector<std::vector<std::vector<UserActionFull>>> fold_channels(
    const StateSpace& space, const ActionCache& cache) {
  const int T = space.period();
  const int H = space.num_channel_states();
  std::vector<std::vector<std::vector<UserActionFull>>> out(T);
  for (int p = 0; p < T; ++p) {
    out[p].resize(space.num_states(p));
    for (int s = 0; s < space.num_states(p); ++s) {
      const int h = space.channel_of(s);
      for (const auto& a : cache.at(p, s)) {
        UserActionFull f;
        f.action = &a;
        for (const auto& [tid, prob] : a.next_traffic)
          for (int h2 = 0; h2 < H; ++h2) {
            const double q = prob * space.channel().transition[h][h2];
            if (q > 0.0)
              f.next.emplace_back(space.state_index((p + 1) % T, tid, h2), q);
          }
        out[p][s].push_back(std::move(f));
      }
    }
  }
  return out;
}

}  // namespace

JointSolveResult solve_joint(const JointSpace& joint,
                             const std::vector<const ActionCache*>& caches,
                             double alpha, const JointOptions& opts) {
  const int M = joint.num_users();
  const int T = joint.period();
  const double lambda_const = (opts.relaxed && M >= 2) ? opts.lambda / M : 0.0;

  std::vector<std::vector<std::vector<std::vector<UserActionFull>>>> full;
  for (int i = 0; i < M; ++i)
    full.push_back(fold_channels(joint.user(i), *caches[i]));

  // admissible x-index tuples
  std::vector<std::vector<int>> x_tuples;
  {
    const int nx = static_cast<int>(joint.user(0).x_grid().size());
    std::vector<int> cur(M, 0);
    std::function<void(int, double)> rec = [&](int u, double sum) {
      if (u == M) {
        x_tuples.push_back(cur);
        return;
      }
      for (int xi = 0; xi < nx; ++xi) {
        const double x = joint.user(u).x_grid()[xi];
        if (!opts.relaxed && sum + x > 1.0 + 1e-9) continue;
        cur[u] = xi;
        rec(u + 1, sum + x);
      }
    };
    rec(0, 0.0);
  }

  // enumerate joint actions per joint state once
  std::vector<std::vector<std::vector<JointAction>>> jactions(T);
  for (int p = 0; p < T; ++p) {
    jactions[p].resize(joint.num_states(p));
    for (int js = 0; js < joint.num_states(p); ++js) {
      const auto per_user = joint.split(p, js);
      auto& list = jactions[p][js];
      for (const auto& xt : x_tuples) {
        std::vector<JointAction> partial(1);
        partial[0].next = {{0, 1.0}};
        bool ok = true;
        for (int u = 0; u < M && ok; ++u) {
          const int up = joint.user_phase(u, p);
          const auto& uacts = full[u][up][per_user[u]];
          std::vector<JointAction> grown;
          const int next_n = joint.user(u).num_states((up + 1) % joint.user(u).period());
          bool any = false;
          for (const auto& ua : uacts) {
            if (ua.action->x_idx != xt[u]) continue;
            any = true;
            for (const auto& par : partial) {
              JointAction ja = par;
              ja.reward += ua.action->util - opts.lambda * ua.action->x * (opts.relaxed ? 1.0 : 0.0) +
                           lambda_const;
              ja.x_idx.push_back(xt[u]);
              ja.y.push_back(ua.action->y);
              std::vector<std::pair<int, double>> next;
              next.reserve(ja.next.size() * ua.next.size());
              for (const auto& [base, bp] : ja.next)
                for (const auto& [usn, up2] : ua.next)
                  next.emplace_back(base * next_n + usn, bp * up2);
              ja.next = std::move(next);
              grown.push_back(std::move(ja));
            }
          }
          if (!any) ok = false;
          partial = std::move(grown);
        }
        if (ok)
          for (auto& ja : partial) list.push_back(std::move(ja));
      }
    }
  }

  std::vector<std::vector<double>> v(T), nv(T);
  for (int p = 0; p < T; ++p) {
    v[p].assign(joint.num_states(p), 0.0);
    nv[p] = v[p];
  }

  double residual = 0.0;
  int iter = 0;
  for (; iter < opts.solve.max_iters; ++iter) {
    residual = 0.0;
    for (int p = 0; p < T; ++p) {
      const auto& nxt = v[(p + 1) % T];
      for (int js = 0; js < joint.num_states(p); ++js) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& ja : jactions[p][js]) {
          double cont = 0.0;
          for (const auto& [idx, prob] : ja.next) cont += prob * nxt[idx];
          const double val = ja.reward + alpha * cont;
          if (val > best) best = val;
        }
        nv[p][js] = best;
        residual = std::max(residual, std::abs(best - v[p][js]));
      }
    }
    std::swap(v, nv);
    if (residual <= opts.solve.tol) break;
  }
  if (residual > opts.solve.tol)
    throw std::runtime_error("joint value iteration did not converge; residual " +
                             std::to_string(residual));

  JointSolveResult res;
  res.values = v;
  res.iterations = iter + 1;
  res.residual = residual;
  res.joint_period = T;
  res.x_idx.resize(T);
  res.y.resize(T);
  for (int p = 0; p < T; ++p) {
    res.x_idx[p].resize(joint.num_states(p));
    res.y[p].resize(joint.num_states(p));
    const auto& nxt = v[(p + 1) % T];
    for (int js = 0; js < joint.num_states(p); ++js) {
      double best = -std::numeric_limits<double>::infinity();
      const JointAction* arg = nullptr;
      for (const auto& ja : jactions[p][js]) {
        double cont = 0.0;
        for (const auto& [idx, prob] : ja.next) cont += prob * nxt[idx];
        const double val = ja.reward + alpha * cont;
        if (val > best) {
          best = val;
          arg = &ja;
        }
      }
      res.x_idx[p][js] = arg->x_idx;
      res.y[p][js] = arg->y;
    }
  }
  return res;
}

double joint_initial_value(const JointSpace& joint, const JointSolveResult& sol,
                           const std::vector<std::vector<double>>& v0s) {
  double acc = 0.0;
  for (int js = 0; js < joint.num_states(0); ++js) {
    const auto per_user = joint.split(0, js);
    double prob = 1.0;
    for (int i = 0; i < joint.num_users(); ++i) prob *= v0s[i][per_user[i]];
    if (prob > 0.0) acc += prob * sol.values[0][js];
  }
  return acc;
}

}  // namespace dagsched
