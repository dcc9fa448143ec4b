#include "dagsched/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dagsched {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(path + "." + key, "expected a number");
  return v->get<double>();
}

long long get_integer(const json& obj, const std::string& path, const std::string& key,
                      long long fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
  return v->get<long long>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key,
              bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(path + "." + key, "expected a boolean");
  return v->get<bool>();
}

DuSpec parse_du(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  require_keys(j, path, {"id", "q", "d", "sizes", "V", "parents"});
  DuSpec du;
  du.id = static_cast<int>(get_integer(j, path, "id", 0));
  if (!find(j, "id")) throw ConfigError(path + ".id", "required");
  du.q = get_number(j, path, "q", 0.0);
  if (!find(j, "q")) throw ConfigError(path + ".q", "required");
  if (du.q < 0) throw ConfigError(path + ".q", "must be nonnegative");
  du.deadline = static_cast<int>(get_integer(j, path, "d", 0));
  du.loss_threshold = static_cast<int>(get_integer(j, path, "V", 1));
  const json* sizes = find(j, "sizes");
  if (!sizes || !sizes->is_object())
    throw ConfigError(path + ".sizes", "required object of count -> probability");
  for (const auto& [key, value] : sizes->items()) {
    int count = 0;
    try {
      size_t pos = 0;
      count = std::stoi(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError(path + ".sizes." + key, "key must be an integer packet count");
    }
    if (!value.is_number())
      throw ConfigError(path + ".sizes." + key, "expected a probability");
    du.sizes.emplace_back(count, value.get<double>());
  }
  std::sort(du.sizes.begin(), du.sizes.end());
  if (const json* p = find(j, "parents")) {
    if (!p->is_array()) throw ConfigError(path + ".parents", "expected an array");
    for (const auto& e : *p) {
      if (!e.is_number_integer())
        throw ConfigError(path + ".parents", "entries must be DU ids");
      du.parents.push_back(e.get<int>());
    }
  }
  return du;
}

GopSpec parse_gop(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  require_keys(j, path, {"period", "stw", "initial_deadline", "dus"});
  GopSpec gop;
  gop.period = static_cast<int>(get_integer(j, path, "period", 1));
  gop.stw = static_cast<int>(get_integer(j, path, "stw", 1));
  gop.initial_deadline = static_cast<int>(get_integer(j, path, "initial_deadline", 0));
  const json* dus = find(j, "dus");
  if (!dus || !dus->is_array()) throw ConfigError(path + ".dus", "required array");
  for (size_t i = 0; i < dus->size(); ++i)
    gop.dus.push_back(parse_du((*dus)[i], path + ".dus[" + std::to_string(i) + "]"));
  try {
    gop.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return gop;
}

ChannelSpec parse_channel(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  require_keys(j, path, {"states", "transition", "peak_rates"});
  ChannelSpec chan;
  const json* states = find(j, "states");
  if (!states || !states->is_array()) throw ConfigError(path + ".states", "required array");
  for (const auto& e : *states) chan.states.push_back(e.get<double>());
  const json* trans = find(j, "transition");
  if (!trans || !trans->is_array())
    throw ConfigError(path + ".transition", "required matrix");
  for (const auto& row : *trans) {
    if (!row.is_array()) throw ConfigError(path + ".transition", "expected rows");
    chan.transition.push_back(row.get<std::vector<double>>());
  }
  const json* rates = find(j, "peak_rates");
  if (!rates || !rates->is_array())
    throw ConfigError(path + ".peak_rates", "required array");
  for (const auto& e : *rates) {
    if (!e.is_number_integer())
      throw ConfigError(path + ".peak_rates", "entries must be integer packets/slot");
    chan.peak_rates.push_back(e.get<int>());
  }
  try {
    chan.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return chan;
}

}  // namespace

void MultiUserInstance::validate() const {
  if (users.empty()) throw ConfigError("users", "at least one user required");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha", "must lie in [0, 1)");
  if (horizon < 0) throw ConfigError("horizon", "must be nonnegative");
  ResourceActionSet grid{x_grid};
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("x_grid", e.what());
  }
}

std::vector<StateSpace> MultiUserInstance::make_spaces() const {
  std::vector<StateSpace> spaces;
  spaces.reserve(users.size());
  for (const auto& u : users) spaces.emplace_back(u.gop, u.channel, x_grid, state_budget);
  return spaces;
}

MultiUserInstance parse_instance(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("", "top level must be an object");
  require_keys(j, "", {"users", "x_grid", "alpha", "horizon", "seed", "state_budget",
                       "lambda", "solver", "pricing", "learning"});

  MultiUserInstance inst;
  inst.alpha = get_number(j, "", "alpha", inst.alpha);
  inst.horizon = get_integer(j, "", "horizon", inst.horizon);
  inst.seed = static_cast<std::uint64_t>(get_integer(j, "", "seed", 1));
  inst.state_budget = get_integer(j, "", "state_budget", inst.state_budget);
  inst.lambda = get_number(j, "", "lambda", inst.lambda);

  const json* grid = find(j, "x_grid");
  if (!grid || !grid->is_array()) throw ConfigError("x_grid", "required array");
  inst.x_grid = grid->get<std::vector<double>>();

  const json* users = find(j, "users");
  if (!users || !users->is_array() || users->empty())
    throw ConfigError("users", "required nonempty array");
  for (size_t i = 0; i < users->size(); ++i) {
    const std::string path = "users[" + std::to_string(i) + "]";
    const json& u = (*users)[i];
    if (!u.is_object()) throw ConfigError(path, "expected an object");
    require_keys(u, path, {"gop", "channel"});
    const json* gop = find(u, "gop");
    const json* chan = find(u, "channel");
    if (!gop) throw ConfigError(path + ".gop", "required");
    if (!chan) throw ConfigError(path + ".channel", "required");
    inst.users.push_back({parse_gop(*gop, path + ".gop"),
                          parse_channel(*chan, path + ".channel")});
  }

  if (const json* s = find(j, "solver")) {
    require_keys(*s, "solver", {"tol", "max_iters"});
    inst.solver.tol = get_number(*s, "solver", "tol", inst.solver.tol);
    inst.solver.max_iters =
        static_cast<int>(get_integer(*s, "solver", "max_iters", inst.solver.max_iters));
  }
  if (const json* p = find(j, "pricing")) {
    require_keys(*p, "pricing", {"lambda0", "beta0", "max_iters", "tol"});
    inst.pricing.lambda0 = get_number(*p, "pricing", "lambda0", inst.pricing.lambda0);
    inst.pricing.beta0 = get_number(*p, "pricing", "beta0", inst.pricing.beta0);
    inst.pricing.max_iters = static_cast<int>(
        get_integer(*p, "pricing", "max_iters", inst.pricing.max_iters));
    inst.pricing.tol = get_number(*p, "pricing", "tol", inst.pricing.tol);
  }
  if (const json* l = find(j, "learning")) {
    require_keys(*l, "learning",
                 {"critic_c", "critic_exp", "actor_c", "actor_exp", "pd_c", "pd_exp",
                  "exploration_floor", "assoc_cap", "averaged_action", "kappa0",
                  "price_period", "lambda_max", "pref_max"});
    LearningConfig& c = inst.learning;
    c.critic_c = get_number(*l, "learning", "critic_c", c.critic_c);
    c.critic_exp = get_number(*l, "learning", "critic_exp", c.critic_exp);
    c.actor_c = get_number(*l, "learning", "actor_c", c.actor_c);
    c.actor_exp = get_number(*l, "learning", "actor_exp", c.actor_exp);
    c.pd_c = get_number(*l, "learning", "pd_c", c.pd_c);
    c.pd_exp = get_number(*l, "learning", "pd_exp", c.pd_exp);
    c.exploration_floor =
        get_number(*l, "learning", "exploration_floor", c.exploration_floor);
    c.assoc_cap = static_cast<int>(get_integer(*l, "learning", "assoc_cap", c.assoc_cap));
    c.averaged_action = get_bool(*l, "learning", "averaged_action", c.averaged_action);
    c.kappa0 = get_number(*l, "learning", "kappa0", c.kappa0);
    c.price_period =
        static_cast<int>(get_integer(*l, "learning", "price_period", c.price_period));
    c.lambda_max = get_number(*l, "learning", "lambda_max", c.lambda_max);
    c.pref_max = get_number(*l, "learning", "pref_max", c.pref_max);
  }

  inst.validate();
  return inst;
}

MultiUserInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open instance file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_instance(text.str());
}

std::string effective_config(const MultiUserInstance& inst) {
  json j;
  j["alpha"] = inst.alpha;
  j["horizon"] = inst.horizon;
  j["seed"] = inst.seed;
  j["state_budget"] = inst.state_budget;
  j["lambda"] = inst.lambda;
  j["x_grid"] = inst.x_grid;
  j["solver"] = {{"tol", inst.solver.tol}, {"max_iters", inst.solver.max_iters}};
  j["pricing"] = {{"lambda0", inst.pricing.lambda0},
                  {"beta0", inst.pricing.beta0},
                  {"max_iters", inst.pricing.max_iters},
                  {"tol", inst.pricing.tol}};
  const LearningConfig& c = inst.learning;
  j["learning"] = {{"critic_c", c.critic_c},
                   {"critic_exp", c.critic_exp},
                   {"actor_c", c.actor_c},
                   {"actor_exp", c.actor_exp},
                   {"pd_c", c.pd_c},
                   {"pd_exp", c.pd_exp},
                   {"exploration_floor", c.exploration_floor},
                   {"assoc_cap", c.assoc_cap},
                   {"averaged_action", c.averaged_action},
                   {"kappa0", c.kappa0},
                   {"price_period", c.price_period},
                   {"lambda_max", c.lambda_max},
                   {"pref_max", c.pref_max}};
  j["users"] = json::array();
  for (const auto& u : inst.users) {
    json du_list = json::array();
    for (const auto& d : u.gop.dus) {
      json sizes = json::object();
      for (const auto& [count, prob] : d.sizes) sizes[std::to_string(count)] = prob;
      du_list.push_back({{"id", d.id},
                         {"q", d.q},
                         {"d", d.deadline},
                         {"sizes", sizes},
                         {"V", d.loss_threshold},
                         {"parents", d.parents}});
    }
    j["users"].push_back(
        {{"gop",
          {{"period", u.gop.period},
           {"stw", u.gop.stw},
           {"initial_deadline", u.gop.initial_deadline},
           {"dus", du_list}}},
         {"channel",
          {{"states", u.channel.states},
           {"transition", u.channel.transition},
           {"peak_rates", u.channel.peak_rates}}}});
  }
  return j.dump(2) + "\n";
}

}  // namespace dagsched
