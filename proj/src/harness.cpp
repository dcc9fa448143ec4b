#include "dagsched/harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dagsched {

namespace {

std::string join(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ':';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct UserSim {
  const StateSpace* space;
  Rng channel_rng;
  Rng sizes_rng;
  Rng explore_rng;
  UserState state;
};

UserSim init_user(const StateSpace& space, std::uint64_t seed, int user) {
  UserSim sim{&space, make_stream(seed, user, StreamKind::Channel),
              make_stream(seed, user, StreamKind::Sizes),
              make_stream(seed, user, StreamKind::Exploration), {}};
  // initial state: fresh draw per phase-0 instance, channel uniform
  const auto& pattern = space.patterns()[0];
  std::vector<int> buffers(pattern.size());
  for (int i = 0; i < pattern.size(); ++i) {
    const DuSpec& d = space.gop().du(pattern.instances[i].du_id);
    std::vector<double> probs;
    for (const auto& [count, p] : d.sizes) probs.push_back(p);
    buffers[i] = d.sizes[sample_index(probs, sim.sizes_rng)].first;
  }
  std::uniform_int_distribution<int> ch(0, space.num_channel_states() - 1);
  sim.state = {TrafficState{0, buffers}, ch(sim.channel_rng)};
  return sim;
}

/// Advances one user's state: samples h', draws one size per fresh slot of
/// the next pattern (positionally, whether the slot ends up useless or
/// not), and applies the deterministic carryover marking.
std::pair<UserState, std::vector<int>> advance(UserSim& sim, const ScheduleAction& y) {
  const StateSpace& space = *sim.space;
  const int T = space.period();
  const int p = sim.state.traffic.phase % T;
  const auto pd = post_decision_buffers(space.gop(), space.patterns(), space.steps(),
                                        sim.state.traffic, y);
  const auto& next = space.patterns()[(p + 1) % T];
  const auto& step = space.steps()[p];
  std::vector<int> draws;
  for (int k = 0; k < next.size(); ++k) {
    if (step.carried_from[k] != PatternStep::kFresh) continue;
    const DuSpec& d = space.gop().du(next.instances[k].du_id);
    std::vector<double> probs;
    for (const auto& [count, pr] : d.sizes) probs.push_back(pr);
    draws.push_back(d.sizes[sample_index(probs, sim.sizes_rng)].first);
  }
  const auto buffers =
      apply_fresh_draws(space.gop(), space.patterns(), space.steps(), p, pd, draws);
  const int h_next = step_channel(space.channel(), sim.state.channel, sim.channel_rng);
  return {{TrafficState{(p + 1) % T, buffers}, h_next}, draws};
}

double slot_utility(const StateSpace& space, const UserState& s,
                    const ScheduleAction& y) {
  const auto& pattern = space.patterns()[s.traffic.phase % space.period()];
  double u = 0.0;
  for (int i = 0; i < pattern.size(); ++i)
    u += space.gop().du(pattern.instances[i].du_id).q * y[i];
  return u;
}

bool on_grid(const StateSpace& space, double x) {
  for (double g : space.x_grid())
    if (std::abs(g - x) < 1e-12) return true;
  return false;
}

}  // namespace

void MetricsLog::write_csv(const std::string& dir, const std::string& prefix) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int M = static_cast<int>(discounted_utility.size());
  std::vector<std::ofstream> files;
  for (int i = 0; i < M; ++i) {
    files.emplace_back(fs::path(dir) / (prefix + "_user" + std::to_string(i) + ".csv"));
    files.back() << "slot,phase,channel,buffers,x_req,x_hat,schedule,utility,lambda\n";
  }
  for (const auto& r : rows)
    files[r.user] << r.slot << ',' << r.phase << ',' << r.channel << ',' << r.buffers
                  << ',' << fmt(r.x_req) << ',' << fmt(r.x_hat) << ',' << r.schedule
                  << ',' << fmt(r.util) << ',' << fmt(r.lambda) << '\n';

  std::ofstream agg(fs::path(dir) / (prefix + "_summary.csv"));
  agg << "user,discounted_utility,discounted_priced_utility\n";
  for (int i = 0; i < M; ++i)
    agg << i << ',' << fmt(discounted_utility[i]) << ',' << fmt(discounted_priced[i])
        << '\n';
  agg << "total," << fmt(total_discounted) << ",\n";
  agg << "violations," << violations << ",\n";
  agg << "seed," << seed << ",\n";
  if (!dual_iters_per_slot.empty()) {
    long long total = std::accumulate(dual_iters_per_slot.begin(),
                                      dual_iters_per_slot.end(), 0LL);
    agg << "dual_iters_mean," << fmt(double(total) / dual_iters_per_slot.size()) << ",\n";
    agg << "dual_iters_max,"
        << *std::max_element(dual_iters_per_slot.begin(), dual_iters_per_slot.end())
        << ",\n";
  }
}

ExactPolicyAgent::ExactPolicyAgent(const StateSpace& space, SolveResult solved,
                                   double alpha)
    : space_(&space), solved_(std::move(solved)), alpha_(alpha) {}

double ExactPolicyAgent::request(const UserState& s, Rng&) {
  const int p = s.traffic.phase % space_->period();
  const int sidx =
      space_->state_index(p, space_->traffic_index(p, s.traffic.buffers), s.channel);
  return space_->x_grid()[solved_.policy.x_idx[p][sidx]];
}

ScheduleAction ExactPolicyAgent::schedule(const UserState& s, double x_hat) {
  const int p = s.traffic.phase % space_->period();
  const int r = rate(space_->channel(), s.channel, x_hat);
  return greedy_schedule(space_->gop(), space_->patterns(), space_->steps(), s.traffic,
                         r, alpha_,
                         [&](const std::vector<int>& pd) {
                           return exact_pd_value(*space_, solved_.values, p, pd,
                                                 s.channel);
                         });
}

ScheduleAction priority_schedule(const StateSpace& space, const TrafficState& traffic,
                                 int rate_packets) {
  const auto& pattern = space.patterns()[traffic.phase % space.period()];
  std::uint32_t useless = 0;
  for (int i = 0; i < pattern.size(); ++i)
    if (traffic.buffers[i] == -1) useless |= 1u << i;

  std::vector<int> order(pattern.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return space.gop().du(pattern.instances[a].du_id).q >
           space.gop().du(pattern.instances[b].du_id).q;
  });

  ScheduleAction y(pattern.size(), 0);
  int left = rate_packets;
  for (int i : order) {
    if (left <= 0) break;
    if (traffic.buffers[i] <= 0) continue;
    if (pattern.ancestor_mask[i] & useless) continue;
    y[i] = std::min(traffic.buffers[i], left);
    left -= y[i];
  }
  return y;
}

ScheduleAction PriorityAgent::schedule(const UserState& s, double x_hat) {
  return priority_schedule(*space_, s.traffic,
                           rate(space_->channel(), s.channel, x_hat));
}

MetricsLog run_episode(const std::vector<const StateSpace*>& spaces,
                       const std::vector<Agent*>& agents, const EpisodeConfig& cfg) {
  const int M = static_cast<int>(spaces.size());
  MetricsLog log;
  log.seed = cfg.seed;
  log.discounted_utility.assign(M, 0.0);
  log.discounted_priced.assign(M, 0.0);

  std::vector<UserSim> sims;
  for (int i = 0; i < M; ++i) sims.push_back(init_user(*spaces[i], cfg.seed, i));

  double lambda = cfg.lambda0;
  int epoch = 0;
  std::vector<std::vector<double>> epoch_requests(M);
  double discount = 1.0;

  for (long long t = 0; t < cfg.horizon; ++t) {
    std::vector<double> requests(M);
    for (int i = 0; i < M; ++i) {
      requests[i] = agents[i]->request(sims[i].state, sims[i].explore_rng);
      if (requests[i] < 0.0 || requests[i] > 1.0 ||
          (!agents[i]->off_grid_ok() && !on_grid(*spaces[i], requests[i])))
        throw std::runtime_error("agent " + std::to_string(i) +
                                 " requested an allocation outside the grid");
      epoch_requests[i].push_back(requests[i]);
    }
    const auto grants = scale_allocations(requests);
    double granted_total = 0.0;
    for (double g : grants) granted_total += g;
    if (granted_total > 1.0 + 1e-12) ++log.violations;

    for (int i = 0; i < M; ++i) {
      UserSim& sim = sims[i];
      const UserState s = sim.state;
      const ScheduleAction y = agents[i]->schedule(s, grants[i]);
      const int r = rate(sim.space->channel(), s.channel, grants[i]);
      if (!schedule_feasible(s.traffic, y, r))
        throw std::runtime_error("agent schedule infeasible");
      const double u = slot_utility(*sim.space, s, y);

      auto [next, draws] = advance(sim, y);
      agents[i]->learn(s, grants[i], y, next.channel, draws, lambda, sim.explore_rng);

      log.rows.push_back({t, i, s.traffic.phase, s.channel, join(s.traffic.buffers),
                          requests[i], grants[i], join(y), u, lambda});
      log.discounted_utility[i] += discount * u;
      log.discounted_priced[i] += discount * (u - lambda * grants[i]);
      sim.state = next;
    }
    discount *= cfg.alpha;

    if (cfg.price_mode == PriceMode::Stochastic &&
        (t + 1) % cfg.price_period == 0) {
      const double kappa = cfg.kappa0 / (1.0 + epoch);
      lambda = stochastic_price_update(lambda, epoch_requests, kappa, cfg.alpha);
      for (auto& v : epoch_requests) v.clear();
      ++epoch;
    }
  }
  for (int i = 0; i < M; ++i) log.total_discounted += log.discounted_utility[i];
  return log;
}

namespace {

/// Best myopic utility for one user at a given allocation: greedy by
/// descending q over every instance with packets left, which is exact for
/// the linear one-shot objective (no ancestor filter — Eq. 2 pays for any
/// transmitted packet, useless instances are already pinned to 0).
double myopic_best(const StateSpace& space, const UserState& s, double x,
                   ScheduleAction* out_y) {
  const auto& pattern = space.patterns()[s.traffic.phase % space.period()];
  std::vector<int> order(pattern.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return space.gop().du(pattern.instances[a].du_id).q >
           space.gop().du(pattern.instances[b].du_id).q;
  });
  ScheduleAction y(pattern.size(), 0);
  int left = rate(space.channel(), s.channel, x);
  for (int i : order) {
    if (left <= 0) break;
    if (s.traffic.buffers[i] <= 0) continue;
    y[i] = std::min(s.traffic.buffers[i], left);
    left -= y[i];
  }
  double u = slot_utility(space, s, y);
  if (out_y) *out_y = std::move(y);
  return u;
}

}  // namespace

MetricsLog run_baseline_myopic(const std::vector<const StateSpace*>& spaces,
                               const MyopicConfig& cfg) {
  const int M = static_cast<int>(spaces.size());
  MetricsLog log;
  log.seed = cfg.seed;
  log.discounted_utility.assign(M, 0.0);
  log.discounted_priced.assign(M, 0.0);

  std::vector<UserSim> sims;
  for (int i = 0; i < M; ++i) sims.push_back(init_user(*spaces[i], cfg.seed, i));

  const auto& grid = spaces[0]->x_grid();
  std::vector<std::vector<double>> tuples;
  {
    std::vector<double> cur(M, 0.0);
    std::function<void(int, double)> rec = [&](int u, double sum) {
      if (u == M) {
        tuples.push_back(cur);
        return;
      }
      for (double x : grid) {
        if (sum + x > 1.0 + 1e-9) continue;
        cur[u] = x;
        rec(u + 1, sum + x);
      }
    };
    rec(0, 0.0);
  }

  double discount = 1.0;
  for (long long t = 0; t < cfg.horizon; ++t) {
    // exact one-shot optimum by enumeration over the grid simplex
    double best = -1.0;
    const std::vector<double>* arg = nullptr;
    for (const auto& tuple : tuples) {
      double total = 0.0;
      for (int i = 0; i < M; ++i)
        total += myopic_best(*spaces[i], sims[i].state, tuple[i], nullptr);
      if (total > best) {
        best = total;
        arg = &tuple;
      }
    }

    // per-slot scalar-price dual variant, iteration count only
    {
      double lam = 0.0;
      int iters = 0;
      for (; iters < cfg.dual_max_iters; ++iters) {
        double consumed = 0.0;
        for (int i = 0; i < M; ++i) {
          double bestv = -std::numeric_limits<double>::infinity();
          double bestx = 0.0;
          for (double x : grid) {
            const double v = myopic_best(*spaces[i], sims[i].state, x, nullptr) - lam * x;
            if (v > bestv) {
              bestv = v;
              bestx = x;
            }
          }
          consumed += bestx;
        }
        const double beta = cfg.dual_beta0 / (1.0 + iters);
        const double next = std::max(0.0, lam + beta * (consumed - 1.0));
        if (std::abs(next - lam) <= cfg.dual_tol) break;
        lam = next;
      }
      log.dual_iters_per_slot.push_back(iters + 1);
    }

    for (int i = 0; i < M; ++i) {
      UserSim& sim = sims[i];
      const UserState s = sim.state;
      ScheduleAction y;
      const double u = myopic_best(*sim.space, s, (*arg)[i], &y);
      auto [next, draws] = advance(sim, y);
      log.rows.push_back({t, i, s.traffic.phase, s.channel, join(s.traffic.buffers),
                          (*arg)[i], (*arg)[i], join(y), u, 0.0});
      log.discounted_utility[i] += discount * u;
      log.discounted_priced[i] += discount * u;
      sim.state = next;
    }
    discount *= cfg.alpha;
  }
  for (int i = 0; i < M; ++i) log.total_discounted += log.discounted_utility[i];
  return log;
}

MetricsLog run_baseline_priority(const std::vector<const StateSpace*>& spaces,
                                 const std::vector<double>& fixed_x,
                                 const EpisodeConfig& cfg) {
  std::vector<std::unique_ptr<PriorityAgent>> owned;
  std::vector<Agent*> agents;
  for (size_t i = 0; i < spaces.size(); ++i) {
    owned.push_back(std::make_unique<PriorityAgent>(*spaces[i], fixed_x[i]));
    agents.push_back(owned.back().get());
  }
  return run_episode(spaces, agents, cfg);
}

}  // namespace dagsched
