#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dagsched/dual.hpp"
#include "dagsched/learning.hpp"
#include "dagsched/mdp.hpp"

namespace dagsched {

/// Schema violation in an instance file; `key_path` points at the
/// offending key (e.g. "users[0].gop.dus[1].q").
struct ConfigError : std::runtime_error {
  std::string key_path;
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what),
        key_path(std::move(path)) {}
};

struct UserSpec {
  GopSpec gop;
  ChannelSpec channel;
};

/// One instance file, fully materialized: every field carries either the
/// file's value or the documented default.
struct MultiUserInstance {
  std::vector<UserSpec> users;
  std::vector<double> x_grid;
  double alpha = 0.9;
  long long horizon = 10000;
  std::uint64_t seed = 1;
  long long state_budget = 1'000'000;
  double lambda = 0.0;

  SolveOptions solver;
  PricingConfig pricing;
  LearningConfig learning;

  int num_users() const { return static_cast<int>(users.size()); }
  void validate() const;

  /// Per-user StateSpaces (order matches `users`).
  std::vector<StateSpace> make_spaces() const;
};

/// Parses and validates an instance file. Unknown keys are rejected with
/// the offending key path in the error.
MultiUserInstance load_instance(const std::string& path);
MultiUserInstance parse_instance(const std::string& json_text);

/// The effective configuration with all defaults materialized; parsing it
/// back reproduces the same instance.
std::string effective_config(const MultiUserInstance& inst);

}  // namespace dagsched
