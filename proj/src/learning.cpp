#include "dagsched/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dagsched {

ScheduleAction greedy_schedule(
    const GopSpec& gop, const std::vector<DependencyPattern>& patterns,
    const std::vector<PatternStep>& steps, const TrafficState& state, int rate,
    double alpha, const std::function<double(const std::vector<int>&)>& pd_value) {
  const DependencyPattern& pattern = patterns[state.phase % gop.period];
  double best = -std::numeric_limits<double>::infinity();
  ScheduleAction arg;
  for (auto& y : feasible_schedules(state, pattern, rate)) {
    double u = 0.0;
    for (int i = 0; i < pattern.size(); ++i)
      u += gop.du(pattern.instances[i].du_id).q * y[i];
    const double score =
        u + alpha * pd_value(post_decision_buffers(gop, patterns, steps, state, y));
    if (score > best) {
      best = score;
      arg = std::move(y);
    }
  }
  return arg;
}

double stochastic_price_update(double lambda,
                               const std::vector<std::vector<double>>& user_allocations,
                               double kappa, double alpha) {
  double g = -1.0 / (1.0 - alpha);
  for (const auto& xs : user_allocations) {
    double w = 1.0;
    for (double x : xs) {
      g += w * x;
      w *= alpha;
    }
  }
  return std::max(0.0, lambda + kappa * g);
}

Learner::Learner(const StateSpace& space, LearningConfig cfg, double alpha)
    : space_(&space),
      cfg_(cfg),
      alpha_(alpha),
      num_x_(static_cast<int>(space.x_grid().size())) {
  const int T = space.period();
  const int H = space.num_channel_states();
  critic_.resize(T);
  actor_.resize(T);
  pd_.resize(T);
  n_state_.resize(T);
  n_actor_.resize(T);
  n_pd_.resize(T);
  pd_radices_.resize(T);
  for (int p = 0; p < T; ++p) {
    critic_[p].assign(space.num_states(p), 0.0);
    n_state_[p].assign(space.num_states(p), 0);
    actor_[p].assign(static_cast<size_t>(space.num_states(p)) * num_x_, 0.0);
    n_actor_[p].assign(actor_[p].size(), 0);
    const auto& next = space.patterns()[(p + 1) % T];
    long long count = 1;
    for (const auto& inst : next.instances) {
      pd_radices_[p].push_back(space.gop().du(inst.du_id).max_size() + 3);
      count *= pd_radices_[p].back();
    }
    pd_[p].assign(count * H, 0.0);
    n_pd_[p].assign(pd_[p].size(), 0);
  }

  double max_rate = 0.0, max_q = 0.0;
  for (int r : space.channel().peak_rates) max_rate = std::max(max_rate, double(r));
  for (const auto& d : space.gop().dus) max_q = std::max(max_q, d.q);
  value_hi_ = max_rate * max_q;
  value_lo_ = -cfg_.lambda_max;
}

int Learner::pd_index(int phase, const std::vector<int>& pd, int h) const {
  int idx = 0;
  for (size_t i = 0; i < pd.size(); ++i)
    idx = idx * pd_radices_[phase][i] + (pd[i] + 2);
  return idx * space_->num_channel_states() + h;
}

double Learner::pd_value(int phase, const std::vector<int>& pd, int h) const {
  return pd_[phase][pd_index(phase, pd, h)];
}

void Learner::set_pd_value(int phase, const std::vector<int>& pd, int h, double value) {
  pd_[phase][pd_index(phase, pd, h)] = value;
}

std::vector<double> Learner::selection_probs(int phase, int state_idx) const {
  std::vector<double> probs(num_x_);
  double top = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < num_x_; ++k)
    top = std::max(top, actor_[phase][static_cast<size_t>(state_idx) * num_x_ + k]);
  double total = 0.0;
  for (int k = 0; k < num_x_; ++k) {
    probs[k] = std::exp(actor_[phase][static_cast<size_t>(state_idx) * num_x_ + k] - top);
    total += probs[k];
  }
  const double floor = cfg_.exploration_floor;
  for (double& p : probs) p = (1.0 - floor) * (p / total) + floor / num_x_;
  return probs;
}

double Learner::select_resource(const UserState& s, Rng& explore) {
  const int p = s.traffic.phase % space_->period();
  const int sidx = space_->state_index(p, space_->traffic_index(p, s.traffic.buffers),
                                       s.channel);
  const auto probs = selection_probs(p, sidx);
  if (cfg_.averaged_action) {
    double x = 0.0;
    for (int k = 0; k < num_x_; ++k) x += probs[k] * space_->x_grid()[k];
    // nearest grid point stands in for the actor update's action index
    int nearest = 0;
    for (int k = 1; k < num_x_; ++k)
      if (std::abs(space_->x_grid()[k] - x) < std::abs(space_->x_grid()[nearest] - x))
        nearest = k;
    last_x_idx_ = nearest;
    return x;
  }
  last_x_idx_ = sample_index(probs, explore);
  return space_->x_grid()[last_x_idx_];
}

ScheduleAction Learner::schedule(const UserState& s, double x_hat) const {
  const int p = s.traffic.phase % space_->period();
  const int r = rate(space_->channel(), s.channel, x_hat);
  return greedy_schedule(space_->gop(), space_->patterns(), space_->steps(), s.traffic,
                         r, alpha_, [&](const std::vector<int>& pd) {
                           return pd_value(p, pd, s.channel);
                         });
}

double Learner::td_update(const UserState& s, int x_req_idx, double x_hat,
                          const ScheduleAction& y, const UserState& s_next,
                          double lambda) {
  const int T = space_->period();
  const int p = s.traffic.phase % T;
  const int np = s_next.traffic.phase % T;
  const int sidx =
      space_->state_index(p, space_->traffic_index(p, s.traffic.buffers), s.channel);
  const int nidx = space_->state_index(
      np, space_->traffic_index(np, s_next.traffic.buffers), s_next.channel);

  const DependencyPattern& pattern = space_->patterns()[p];
  double u = 0.0;
  for (int i = 0; i < pattern.size(); ++i)
    u += space_->gop().du(pattern.instances[i].du_id).q * y[i];

  const double delta =
      u - lambda * x_hat + alpha_ * critic_[np][nidx] - critic_[p][sidx];

  const double lo = value_lo_ / (1.0 - alpha_);
  const double hi = value_hi_ / (1.0 - alpha_);

  const int ns = ++n_state_[p][sidx];
  const double mu = cfg_.critic_c / std::pow(ns, cfg_.critic_exp);
  critic_[p][sidx] = std::clamp(critic_[p][sidx] + mu * delta, lo, hi);
  ++critic_updates_;

  const size_t aidx = static_cast<size_t>(sidx) * num_x_ + x_req_idx;
  const int na = ++n_actor_[p][aidx];
  const double nu = cfg_.actor_c / std::pow(na, cfg_.actor_exp);
  actor_[p][aidx] = std::clamp(actor_[p][aidx] + nu * delta, 0.0, cfg_.pref_max);

  const auto pd = post_decision_buffers(space_->gop(), space_->patterns(),
                                        space_->steps(), s.traffic, y);
  const int pidx = pd_index(p, pd, s.channel);
  const int npd = ++n_pd_[p][pidx];
  const double phi = cfg_.pd_c / std::pow(npd, cfg_.pd_exp);
  pd_[p][pidx] = (1.0 - phi) * pd_[p][pidx] + phi * critic_[np][nidx];
  return delta;
}

void Learner::associated_update(const UserState& s_real, double x_hat,
                                const ScheduleAction& y_real, int h_next,
                                const std::vector<int>& fresh_draws, double lambda,
                                Rng& explore) {
  const int T = space_->period();
  const int p = s_real.traffic.phase % T;
  const int np = (p + 1) % T;
  const int real_tid = space_->traffic_index(p, s_real.traffic.buffers);
  const int count = space_->num_traffic_states(p);

  std::vector<int> tids{real_tid};
  if (cfg_.assoc_cap > 1) {
    std::vector<int> others;
    others.reserve(count - 1);
    for (int t = 0; t < count; ++t)
      if (t != real_tid) others.push_back(t);
    if (static_cast<int>(others.size()) > cfg_.assoc_cap - 1) {
      for (int k = 0; k < cfg_.assoc_cap - 1; ++k) {
        std::uniform_int_distribution<int> pick(k, static_cast<int>(others.size()) - 1);
        std::swap(others[k], others[pick(explore)]);
      }
      others.resize(cfg_.assoc_cap - 1);
      std::sort(others.begin(), others.end());
    }
    tids.insert(tids.end(), others.begin(), others.end());
  }

  for (int tid : tids) {
    const UserState s{TrafficState{p, space_->traffic_buffers(p, tid)}, s_real.channel};
    const ScheduleAction y = (tid == real_tid) ? y_real : schedule(s, x_hat);
    const auto pd = post_decision_buffers(space_->gop(), space_->patterns(),
                                          space_->steps(), s.traffic, y);
    const auto next_buffers = apply_fresh_draws(space_->gop(), space_->patterns(),
                                                space_->steps(), p, pd, fresh_draws);
    const UserState s_next{TrafficState{np, next_buffers}, h_next};
    td_update(s, last_x_idx_, x_hat, y, s_next, lambda);
  }
}

PolicyFn Learner::greedy_policy() const {
  return [this](int p, int sidx) {
    int best = 0;
    for (int k = 1; k < num_x_; ++k)
      if (actor_[p][static_cast<size_t>(sidx) * num_x_ + k] >
          actor_[p][static_cast<size_t>(sidx) * num_x_ + best])
        best = k;
    const UserState s = space_->state(p, sidx);
    const double x = space_->x_grid()[best];
    return std::make_pair(x, schedule(s, x));
  };
}

}  // namespace dagsched
