// Command-line front end: instance files in, CSV/report files out.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dagsched/config.hpp"
#include "dagsched/harness.hpp"

namespace fs = std::filesystem;
using namespace dagsched;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ':';
    out += std::to_string(v[i]);
  }
  return out;
}

struct CommonArgs {
  std::string instance_path;
  std::string out_dir;
};

fs::path prepare_out(const CommonArgs& args, const MultiUserInstance& inst) {
  fs::path dir = args.out_dir;
  fs::create_directories(dir);
  std::ofstream echo(dir / "effective_config.json");
  echo << effective_config(inst);
  return dir;
}

void write_solve_csv(const fs::path& dir, int user, const StateSpace& space,
                     const SolveResult& solved) {
  std::ofstream out(dir / ("solve_user" + std::to_string(user) + ".csv"));
  out << "phase,state,channel,buffers,value,x,schedule\n";
  for (int p = 0; p < space.period(); ++p)
    for (int s = 0; s < space.num_states(p); ++s) {
      const UserState st = space.state(p, s);
      out << p << ',' << s << ',' << st.channel << ',' << join_ints(st.traffic.buffers)
          << ',' << fmt(solved.values.v[p][s]) << ','
          << fmt(space.x_grid()[solved.policy.x_idx[p][s]]) << ','
          << join_ints(solved.policy.y[p][s]) << '\n';
    }
}

int cmd_solve(const CommonArgs& args, double lambda, bool lambda_set, int user) {
  MultiUserInstance inst = load_instance(args.instance_path);
  if (lambda_set) inst.lambda = lambda;
  const fs::path dir = prepare_out(args, inst);
  const auto spaces = inst.make_spaces();
  for (int i = 0; i < inst.num_users(); ++i) {
    if (user >= 0 && i != user) continue;
    ActionCache cache(spaces[i]);
    const SolveResult solved = solve_local(spaces[i], cache, inst.lambda, inst.alpha,
                                           inst.num_users(), inst.solver);
    write_solve_csv(dir, i, spaces[i], solved);
    const double v0 = expect_initial(initial_distribution(spaces[i]),
                                     solved.values.v[0]);
    std::cout << "user " << i << ": states " << spaces[i].total_states()
              << ", iterations " << solved.iterations << ", initial value "
              << fmt(v0) << '\n';
  }
  return 0;
}

int cmd_dual(const CommonArgs& args) {
  MultiUserInstance inst = load_instance(args.instance_path);
  const fs::path dir = prepare_out(args, inst);
  DualProblem problem(inst.make_spaces(), inst.alpha, inst.solver);
  const PriceTrace trace = price_iterate(problem, inst.pricing);
  std::ofstream out(dir / "price_trace.csv");
  out << "k,lambda,subgradient,dual_value\n";
  for (const auto& r : trace.records)
    out << r.k << ',' << fmt(r.lambda) << ',' << fmt(r.subgradient) << ','
        << fmt(r.dual_value) << '\n';
  std::ofstream summary(dir / "dual_summary.csv");
  summary << "best_lambda,best_dual,converged,iterations\n";
  summary << fmt(trace.best_lambda) << ',' << fmt(trace.best_dual) << ','
          << (trace.converged ? 1 : 0) << ',' << trace.records.size() << '\n';
  std::cout << "lambda* = " << fmt(trace.best_lambda) << ", dual value "
            << fmt(trace.best_dual) << (trace.converged ? "" : " (not converged)")
            << '\n';
  return 0;
}

std::vector<const StateSpace*> pointers(const std::vector<StateSpace>& spaces) {
  std::vector<const StateSpace*> out;
  for (const auto& s : spaces) out.push_back(&s);
  return out;
}

void report(const fs::path& dir, const std::string& prefix, const MetricsLog& log) {
  log.write_csv(dir.string(), prefix);
  std::cout << prefix << ": total discounted utility " << fmt(log.total_discounted)
            << ", violations " << log.violations << ", seed " << log.seed << '\n';
}

int cmd_simulate(const CommonArgs& args, const std::string& agents,
                 const std::string& baseline, double fixed_x, std::uint64_t seed,
                 bool seed_set, long long horizon, bool horizon_set) {
  MultiUserInstance inst = load_instance(args.instance_path);
  if (seed_set) inst.seed = seed;
  if (horizon_set) inst.horizon = horizon;
  const fs::path dir = prepare_out(args, inst);
  const auto spaces = inst.make_spaces();
  const auto ptrs = pointers(spaces);

  if (baseline == "myopic") {
    MyopicConfig cfg;
    cfg.horizon = inst.horizon;
    cfg.seed = inst.seed;
    cfg.alpha = inst.alpha;
    report(dir, "myopic", run_baseline_myopic(ptrs, cfg));
    return 0;
  }

  EpisodeConfig cfg;
  cfg.horizon = inst.horizon;
  cfg.seed = inst.seed;
  cfg.alpha = inst.alpha;
  cfg.lambda0 = inst.lambda;
  cfg.price_mode = PriceMode::Fixed;

  if (baseline == "priority") {
    std::vector<double> xs(inst.num_users(), fixed_x);
    report(dir, "priority", run_baseline_priority(ptrs, xs, cfg));
    return 0;
  }
  if (agents != "exact")
    throw std::invalid_argument("unknown --agents value: " + agents);

  std::vector<std::unique_ptr<ExactPolicyAgent>> owned;
  std::vector<Agent*> raw;
  for (int i = 0; i < inst.num_users(); ++i) {
    ActionCache cache(spaces[i]);
    SolveResult solved = solve_local(spaces[i], cache, inst.lambda, inst.alpha,
                                     inst.num_users(), inst.solver);
    owned.push_back(std::make_unique<ExactPolicyAgent>(spaces[i], std::move(solved),
                                                       inst.alpha));
    raw.push_back(owned.back().get());
  }
  report(dir, "sim", run_episode(ptrs, raw, cfg));
  return 0;
}

int cmd_learn(const CommonArgs& args, const std::string& agents, int cap, bool cap_set,
              std::uint64_t seed, bool seed_set, long long horizon, bool horizon_set) {
  MultiUserInstance inst = load_instance(args.instance_path);
  if (seed_set) inst.seed = seed;
  if (horizon_set) inst.horizon = horizon;
  if (cap_set) inst.learning.assoc_cap = cap;
  if (agents == "learner-standard")
    inst.learning.assoc_cap = 1;
  else if (agents != "learner")
    throw std::invalid_argument("unknown --agents value: " + agents);
  const fs::path dir = prepare_out(args, inst);
  const auto spaces = inst.make_spaces();

  std::vector<std::unique_ptr<LearnerAgent>> owned;
  std::vector<Agent*> raw;
  for (int i = 0; i < inst.num_users(); ++i) {
    owned.push_back(std::make_unique<LearnerAgent>(spaces[i], inst.learning, inst.alpha));
    raw.push_back(owned.back().get());
  }
  EpisodeConfig cfg;
  cfg.horizon = inst.horizon;
  cfg.seed = inst.seed;
  cfg.alpha = inst.alpha;
  cfg.lambda0 = inst.pricing.lambda0;
  cfg.price_mode = PriceMode::Stochastic;
  cfg.price_period = inst.learning.price_period;
  cfg.kappa0 = inst.learning.kappa0;
  report(dir, "learn", run_episode(pointers(spaces), raw, cfg));
  return 0;
}

int cmd_sweep(const CommonArgs& args, const std::string& sweep_spec) {
  MultiUserInstance inst = load_instance(args.instance_path);
  const fs::path dir = prepare_out(args, inst);

  double lo = 0.1, hi = 1.0, step = 0.1;
  if (std::sscanf(sweep_spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 ||
      step <= 0.0)
    throw std::invalid_argument("--sweep-x expects lo:hi:step");

  std::ofstream out(dir / "sweep.csv");
  out << "x,user,foresighted_value,priority_value\n";
  int rows = 0;
  for (double x = lo; x <= hi + 1e-9; x += step) {
    const double xc = std::min(x, 1.0);
    for (int i = 0; i < inst.num_users(); ++i) {
      // pinned-allocation grid; solver restricted to the pinned index
      std::vector<double> grid{0.0};
      if (xc > 0.0 && xc < 1.0) grid.push_back(xc);
      grid.push_back(1.0);
      const int forced = (xc >= 1.0) ? static_cast<int>(grid.size()) - 1
                                     : static_cast<int>(grid.size()) - 2;
      StateSpace space(inst.users[i].gop, inst.users[i].channel, grid,
                       inst.state_budget);
      ActionCache cache(space);
      SolveOptions opts = inst.solver;
      opts.forced_x_idx = forced;
      const SolveResult solved =
          solve_local(space, cache, 0.0, inst.alpha, 1, opts);
      const auto v0 = initial_distribution(space);
      const double foresighted =
          evaluate_policy_priced(space, policy_fn(space, solved.policy), inst.alpha,
                                 0.0, 0.0, v0)
              .initial_value;
      const EvalResult prio = evaluate_policy_priced(
          space,
          [&](int p, int s) {
            const UserState st = space.state(p, s);
            const int r = rate(space.channel(), st.channel, grid[forced]);
            return std::make_pair(grid[forced], priority_schedule(space, st.traffic, r));
          },
          inst.alpha, 0.0, 0.0, v0);
      out << fmt(xc) << ',' << i << ',' << fmt(foresighted) << ','
          << fmt(prio.initial_value) << '\n';
      ++rows;
    }
  }
  std::cout << "sweep: " << rows << " rows\n";
  return 0;
}

int cmd_oracle(const CommonArgs& args) {
  MultiUserInstance inst = load_instance(args.instance_path);
  const fs::path dir = prepare_out(args, inst);
  const auto spaces = inst.make_spaces();
  const auto ptrs = pointers(spaces);
  std::vector<std::unique_ptr<ActionCache>> caches;
  std::vector<const ActionCache*> cache_ptrs;
  for (const auto& s : spaces) {
    caches.push_back(std::make_unique<ActionCache>(s));
    cache_ptrs.push_back(caches.back().get());
  }
  JointSpace joint(ptrs, inst.state_budget);
  std::vector<std::vector<double>> v0s;
  for (const auto& s : spaces) v0s.push_back(initial_distribution(s));

  std::ofstream rep(dir / "oracle_report.txt");

  // decomposition: relaxed joint value vs sum of local solves
  for (double lambda : {0.0, 0.5, 1.0}) {
    JointOptions jopts;
    jopts.solve = inst.solver;
    jopts.budget = inst.state_budget;
    jopts.relaxed = true;
    jopts.lambda = lambda;
    const JointSolveResult relaxed = solve_joint(joint, cache_ptrs, inst.alpha, jopts);
    const double joint_v = joint_initial_value(joint, relaxed, v0s);
    double local_sum = 0.0;
    for (int i = 0; i < inst.num_users(); ++i) {
      const SolveResult s = solve_local(spaces[i], *cache_ptrs[i], lambda, inst.alpha,
                                        inst.num_users(), inst.solver);
      local_sum += expect_initial(v0s[i], s.values.v[0]);
    }
    rep << "decomposition lambda=" << fmt(lambda) << ": joint=" << fmt(joint_v)
        << " sum_local=" << fmt(local_sum) << " diff=" << fmt(joint_v - local_sum)
        << '\n';
  }

  // duality chain: min dual over a grid >= joint optimum
  JointOptions exact_opts;
  exact_opts.solve = inst.solver;
  exact_opts.budget = inst.state_budget;
  const JointSolveResult exact = solve_joint(joint, cache_ptrs, inst.alpha, exact_opts);
  const double primal = joint_initial_value(joint, exact, v0s);
  DualProblem problem(inst.make_spaces(), inst.alpha, inst.solver);
  double best_dual = std::numeric_limits<double>::infinity();
  for (double lambda = 0.0; lambda <= 10.0 + 1e-9; lambda += 0.25)
    best_dual = std::min(best_dual, problem.dual_value(lambda));
  rep << "duality: min_grid_dual=" << fmt(best_dual) << " joint_optimum=" << fmt(primal)
      << " gap=" << fmt(best_dual - primal) << '\n';
  std::cout << "oracle report written to " << (dir / "oracle_report.txt").string()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dependency- and deadline-aware multi-user MDP scheduling toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  const char* env_out = std::getenv("DAGSCHED_OUT");
  common.out_dir = env_out ? env_out : "out";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("instance", common.instance_path, "instance JSON file")
        ->required();
    cmd->add_option("--out", common.out_dir, "output directory");
  };

  double lambda = 0.0;
  int user = -1;
  auto* solve = app.add_subcommand("solve", "solve one user's priced MDP");
  add_common(solve);
  auto* lambda_opt = solve->add_option("--lambda", lambda, "resource price");
  solve->add_option("--user", user, "user index (default: all)");

  auto* dual = app.add_subcommand("dual", "run the subgradient price iteration");
  add_common(dual);

  std::string agents = "exact";
  std::string baseline;
  double fixed_x = 1.0;
  std::uint64_t seed = 0;
  long long horizon = 0;
  auto* simulate = app.add_subcommand("simulate", "run a multi-user episode");
  add_common(simulate);
  simulate->add_option("--agents", agents, "exact");
  simulate->add_option("--baseline", baseline, "myopic | priority");
  simulate->add_option("--fixed-x", fixed_x, "fixed allocation for the priority baseline");
  auto* seed_opt = simulate->add_option("--seed", seed, "master seed override");
  auto* horizon_opt = simulate->add_option("--horizon", horizon, "slot count override");

  std::string learn_agents = "learner";
  int cap = 0;
  auto* learn = app.add_subcommand("learn", "run an online-learning episode");
  add_common(learn);
  learn->add_option("--agents", learn_agents, "learner | learner-standard");
  auto* cap_opt = learn->add_option("--cap", cap, "associated-state cap override");
  auto* lseed_opt = learn->add_option("--seed", seed, "master seed override");
  auto* lhorizon_opt = learn->add_option("--horizon", horizon, "slot count override");

  std::string sweep_spec = "0.1:1.0:0.1";
  auto* sweep = app.add_subcommand("sweep", "fixed-allocation sweep (foresighted vs priority)");
  add_common(sweep);
  sweep->add_option("--sweep-x", sweep_spec, "lo:hi:step allocation sweep");

  auto* oracle = app.add_subcommand("oracle", "run brute-force/joint oracle comparisons");
  add_common(oracle);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return cmd_solve(common, lambda, lambda_opt->count() > 0, user);
    if (dual->parsed()) return cmd_dual(common);
    if (simulate->parsed())
      return cmd_simulate(common, agents, baseline, fixed_x, seed,
                          seed_opt->count() > 0, horizon, horizon_opt->count() > 0);
    if (learn->parsed())
      return cmd_learn(common, learn_agents, cap, cap_opt->count() > 0, seed,
                       lseed_opt->count() > 0, horizon, lhorizon_opt->count() > 0);
    if (sweep->parsed()) return cmd_sweep(common, sweep_spec);
    if (oracle->parsed()) return cmd_oracle(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
