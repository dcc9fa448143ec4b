#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "dagsched/config.hpp"

using namespace dagsched;

namespace {

const std::string kMinimal = R"({
  "users": [{
    "gop": {
      "period": 2, "stw": 2, "initial_deadline": 0,
      "dus": [
        {"id": 1, "q": 3.0, "d": 0, "sizes": {"1": 0.5, "2": 0.5}, "V": 1, "parents": []},
        {"id": 2, "q": 1.0, "d": 1, "sizes": {"1": 1.0}, "V": 1, "parents": [1]}
      ]
    },
    "channel": {
      "states": [10.0, 20.0],
      "transition": [[0.7, 0.3], [0.3, 0.7]],
      "peak_rates": [2, 4]
    }
  }],
  "x_grid": [0.0, 0.25, 0.5, 0.75, 1.0]
})";

std::string with_patch(const std::string& base, const std::string& needle,
                       const std::string& repl) {
  std::string s = base;
  s.replace(s.find(needle), needle.size(), repl);
  return s;
}

double size_prob(const DuSpec& du, int count) {
  for (const auto& [c, p] : du.sizes)
    if (c == count) return p;
  return 0.0;
}

}  // namespace

TEST_CASE("minimal instance parses with documented defaults") {
  const auto inst = parse_instance(kMinimal);
  REQUIRE(inst.num_users() == 1);
  const auto& gop = inst.users[0].gop;
  CHECK(gop.period == 2);
  CHECK(gop.stw == 2);
  REQUIRE(gop.dus.size() == 2);
  CHECK(gop.du(1).q == 3.0);
  CHECK(gop.du(2).deadline == 1);
  CHECK(gop.du(2).parents == std::vector<int>{1});
  CHECK(size_prob(gop.du(1), 2) == doctest::Approx(0.5));
  CHECK(inst.users[0].channel.peak_rates == std::vector<int>{2, 4});

  // unset keys take the documented defaults
  CHECK(inst.alpha == 0.9);
  CHECK(inst.horizon == 10000);
  CHECK(inst.seed == 1);
  CHECK(inst.lambda == 0.0);
  CHECK(inst.state_budget == 1'000'000);
  CHECK(inst.pricing.beta0 == 0.1);
  CHECK(inst.pricing.max_iters == 200);
  CHECK(inst.learning.assoc_cap == 64);
  CHECK(inst.learning.price_period == 100);

  // and the instance is usable as-is
  const auto spaces = inst.make_spaces();
  REQUIRE(spaces.size() == 1);
  CHECK(spaces[0].period() == 2);
  CHECK(spaces[0].x_grid().size() == 5);
}

TEST_CASE("shipped instance files load") {
  const auto a = load_instance("instances/tiny_a.json");
  CHECK(a.num_users() == 1);
  const auto b = load_instance("instances/tiny_b.json");
  CHECK(b.num_users() == 2);
  CHECK(b.pricing.beta0 == 2.0);
  const auto d = load_instance("instances/default.json");
  CHECK(d.num_users() == 3);
  CHECK(d.alpha == 0.95);
  for (const auto& inst : {a, b, d}) CHECK_NOTHROW(inst.validate());
}

TEST_CASE("unknown keys are rejected with their path") {
  const auto bad = with_patch(kMinimal, "\"q\": 3.0", "\"q\": 3.0, \"bogus\": 1");
  try {
    parse_instance(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key_path == "users[0].gop.dus[0].bogus");
  }
  const auto top = with_patch(kMinimal, "\"x_grid\"", "\"xgrid\"");
  CHECK_THROWS_AS(parse_instance(top), ConfigError);
}

TEST_CASE("invalid values name the offending field") {
  const auto neg_q = with_patch(kMinimal, "\"q\": 3.0", "\"q\": -3.0");
  try {
    parse_instance(neg_q);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key_path == "users[0].gop.dus[0].q");
  }

  const auto bad_sizes =
      with_patch(kMinimal, "{\"1\": 0.5, \"2\": 0.5}", "{\"1\": 0.5, \"2\": 0.6}");
  CHECK_THROWS_AS(parse_instance(bad_sizes), ConfigError);

  const auto bad_grid = with_patch(kMinimal, "[0.0, 0.25, 0.5, 0.75, 1.0]",
                                   "[0.25, 0.5, 1.0]");
  CHECK_THROWS_AS(parse_instance(bad_grid), ConfigError);

  CHECK_THROWS_AS(parse_instance("{\"users\": []}"), ConfigError);
  CHECK_THROWS_AS(parse_instance("not json at all"), ConfigError);
}

TEST_CASE("effective config round-trips byte-stably") {
  const auto inst = parse_instance(kMinimal);
  const std::string echo = effective_config(inst);
  const auto again = parse_instance(echo);
  CHECK(effective_config(again) == echo);
  // defaults are materialized in the echo
  CHECK(echo.find("\"alpha\"") != std::string::npos);
  CHECK(echo.find("\"pricing\"") != std::string::npos);
  CHECK(echo.find("\"learning\"") != std::string::npos);
}
