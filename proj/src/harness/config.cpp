#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "asymac/harness.hpp"

namespace asymac::harness {

std::string version() { return "0.1.0"; }

std::optional<Hyperparameters> table3_defaults(const std::string& env, agent::CriticKind kind) {
  using K = agent::CriticKind;
  if (kind == K::HistoryStateSampled) kind = K::HistoryState;
  struct Row {
    const char* env;
    K kind;
    Hyperparameters hp;
  };
  static const Row rows[] = {
      {"heavenhell-3", K::HistoryState, {0.001, 0.001, 0.1}},  {"heavenhell-3", K::State, {0.001, 0.001, 1.0}},
      {"heavenhell-3", K::History, {0.001, 0.001, 0.1}},       {"heavenhell-3", K::Truncated2, {0.001, 0.0003, 1.0}},
      {"heavenhell-3", K::Truncated4, {0.001, 0.0003, 1.0}},   {"heavenhell-4", K::HistoryState, {0.001, 0.001, 0.1}},
      {"heavenhell-4", K::State, {0.001, 0.001, 0.1}},         {"heavenhell-4", K::History, {0.001, 0.0003, 0.3}},
      {"heavenhell-4", K::Truncated2, {0.001, 0.0003, 0.3}},   {"heavenhell-4", K::Truncated4, {0.001, 0.0003, 0.3}},
      {"shopping-5", K::HistoryState, {0.001, 0.0003, 3.0}},   {"shopping-5", K::State, {0.001, 0.001, 10.0}},
      {"shopping-5", K::History, {0.001, 0.0003, 3.0}},        {"shopping-5", K::Truncated2, {0.001, 0.001, 3.0}},
      {"shopping-5", K::Truncated4, {0.001, 0.001, 3.0}},      {"shopping-6", K::HistoryState, {0.001, 0.0003, 3.0}},
      {"shopping-6", K::State, {0.001, 0.001, 10.0}},          {"shopping-6", K::History, {0.001, 0.0003, 3.0}},
      {"shopping-6", K::Truncated2, {0.001, 0.001, 1.0}},      {"shopping-6", K::Truncated4, {0.001, 0.0003, 10.0}},
  };
  for (const auto& r : rows)
    if (env == r.env && kind == r.kind) return r.hp;
  return std::nullopt;
}

std::vector<double> default_lambda_grid(const std::string& env) {
  if (env.rfind("shopping", 0) == 0) return {0.3, 1.0, 3.0, 10.0, 30.0};
  return {0.01, 0.03, 0.1, 0.3, 1.0};
}

namespace {

std::string trim(const std::string& s) {
  auto b = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto e = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return b < e ? std::string(b, e) : std::string();
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"env", "pomdp_file", "critic", "seeds", "out", "workers"}},
      {"train",
       {"lr_actor", "lr_critic", "lambda0", "entropy_decay_steps", "episodes_per_update", "episode_cap",
        "target_period", "max_timesteps", "gamma_t_weighting", "stop_at_rolling100"}},
      {"net", {"embedding", "hidden", "mlp"}},
      {"grid", {"lr_actor", "lr_critic", "lambda0"}},
      {"provenance", {"version"}},
  };
  return keys;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& t : split_list(v)) out.push_back(to_double(key, t));
  if (out.empty()) throw ConfigError("'" + key + "' must not be empty");
  return out;
}

const std::string* lookup(const ParsedConfig& cfg, const std::string& section, const std::string& key) {
  auto s = cfg.sections.find(section);
  if (s == cfg.sections.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_keys().count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      cfg.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known_keys().at(section).count(key))
      throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    if (!cfg.sections[section].emplace(key, value).second)
      throw ConfigError(where + "duplicate key '" + key + "' in [" + section + "]");
  }
  return cfg;
}

std::string merge_config_text(const std::string& base, const std::string& overrides) {
  ParsedConfig merged = parse_config_text(base);
  for (const auto& [section, keys] : parse_config_text(overrides).sections)
    for (const auto& [key, value] : keys) merged.sections[section][key] = value;
  std::ostringstream out;
  for (const auto& [section, keys] : merged.sections) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << "\n";
  }
  return out.str();
}

std::string default_output_root() {
  const char* root = std::getenv("ASYMAC_OUT");
  return root && *root ? root : "runs";
}

ExperimentSpec experiment_from_config(const ParsedConfig& cfg) {
  ExperimentSpec spec;
  if (auto v = lookup(cfg, "experiment", "env")) spec.env = *v;
  if (auto v = lookup(cfg, "experiment", "pomdp_file")) spec.pomdp_file = *v;
  if (auto v = lookup(cfg, "experiment", "critic")) {
    try {
      spec.kind = agent::parse_critic_kind(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = lookup(cfg, "experiment", "seeds")) {
    spec.seeds.clear();
    for (const auto& t : split_list(*v)) {
      const long long s = to_integer("seeds", t);
      if (s < 0) throw ConfigError("seeds must be nonnegative");
      spec.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (spec.seeds.empty()) throw ConfigError("seeds must not be empty");
  }
  if (auto v = lookup(cfg, "experiment", "out")) spec.out_dir = *v;
  else spec.out_dir = default_output_root() + "/" + spec.env + "-" + agent::short_name(spec.kind);
  if (auto v = lookup(cfg, "experiment", "workers")) {
    spec.workers = static_cast<int>(to_integer("workers", *v));
    if (spec.workers < 1) throw ConfigError("workers must be at least 1");
  }

  if (auto hp = table3_defaults(spec.env, spec.kind)) {
    spec.train.lr_actor = hp->lr_actor;
    spec.train.lr_critic = hp->lr_critic;
    spec.train.lambda0 = hp->lambda0;
  }
  auto& t = spec.train;
  if (auto v = lookup(cfg, "train", "lr_actor")) t.lr_actor = to_double("lr_actor", *v);
  if (auto v = lookup(cfg, "train", "lr_critic")) t.lr_critic = to_double("lr_critic", *v);
  if (auto v = lookup(cfg, "train", "lambda0")) t.lambda0 = to_double("lambda0", *v);
  if (auto v = lookup(cfg, "train", "entropy_decay_steps")) t.entropy_decay_steps = to_integer("entropy_decay_steps", *v);
  if (auto v = lookup(cfg, "train", "episodes_per_update"))
    t.episodes_per_update = static_cast<int>(to_integer("episodes_per_update", *v));
  if (auto v = lookup(cfg, "train", "episode_cap")) t.episode_cap = static_cast<int>(to_integer("episode_cap", *v));
  if (auto v = lookup(cfg, "train", "target_period")) t.target_period = to_integer("target_period", *v);
  if (auto v = lookup(cfg, "train", "max_timesteps")) t.max_timesteps = to_integer("max_timesteps", *v);
  if (auto v = lookup(cfg, "train", "gamma_t_weighting")) t.gamma_t_weighting = to_bool("gamma_t_weighting", *v);
  if (auto v = lookup(cfg, "train", "stop_at_rolling100")) t.stop_at_rolling100 = to_double("stop_at_rolling100", *v);
  if (auto v = lookup(cfg, "net", "embedding")) t.net.embedding = static_cast<int>(to_integer("embedding", *v));
  if (auto v = lookup(cfg, "net", "hidden")) t.net.hidden = static_cast<int>(to_integer("hidden", *v));
  if (auto v = lookup(cfg, "net", "mlp")) {
    t.net.mlp.clear();
    for (const auto& w : split_list(*v)) t.net.mlp.push_back(static_cast<int>(to_integer("mlp", w)));
  }
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (spec.pomdp_file.empty()) {
    const auto names = envs::environment_names();
    const bool known = std::find(names.begin(), names.end(), spec.env) != names.end() ||
                       spec.env.rfind("goodbad-", 0) == 0;
    if (!known) throw ConfigError("unknown environment '" + spec.env + "'");
  }
  return spec;
}

ExperimentSpec experiment_from_text(const std::string& text) { return experiment_from_config(parse_config_text(text)); }

GridSearchSpec grid_from_text(const std::string& text) {
  const auto cfg = parse_config_text(text);
  GridSearchSpec grid;
  grid.base = experiment_from_config(cfg);
  grid.lambda0 = default_lambda_grid(grid.base.env);
  if (auto v = lookup(cfg, "grid", "lr_actor")) grid.lr_actor = to_doubles("lr_actor", *v);
  if (auto v = lookup(cfg, "grid", "lr_critic")) grid.lr_critic = to_doubles("lr_critic", *v);
  if (auto v = lookup(cfg, "grid", "lambda0")) grid.lambda0 = to_doubles("lambda0", *v);
  for (const auto* set : {&grid.lr_actor, &grid.lr_critic, &grid.lambda0})
    for (double x : *set)
      if (!(x > 0.0)) throw ConfigError("grid values must be positive");
  return grid;
}

std::string ExperimentSpec::to_config() const {
  std::ostringstream out;
  out << "[experiment]\n";
  out << "env = " << env << "\n";
  if (!pomdp_file.empty()) out << "pomdp_file = " << pomdp_file << "\n";
  out << "critic = " << agent::short_name(kind) << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  out << "\nout = " << out_dir << "\n";
  out << "workers = " << workers << "\n\n[train]\n";
  out << "lr_actor = " << format_double(train.lr_actor) << "\n";
  out << "lr_critic = " << format_double(train.lr_critic) << "\n";
  out << "lambda0 = " << format_double(train.lambda0) << "\n";
  out << "entropy_decay_steps = " << train.entropy_decay_steps << "\n";
  out << "episodes_per_update = " << train.episodes_per_update << "\n";
  out << "episode_cap = " << train.episode_cap << "\n";
  out << "target_period = " << train.target_period << "\n";
  out << "max_timesteps = " << train.max_timesteps << "\n";
  out << "gamma_t_weighting = " << (train.gamma_t_weighting ? "true" : "false") << "\n";
  if (train.stop_at_rolling100) out << "stop_at_rolling100 = " << format_double(*train.stop_at_rolling100) << "\n";
  out << "\n[net]\nembedding = " << train.net.embedding << "\nhidden = " << train.net.hidden << "\nmlp = ";
  for (std::size_t i = 0; i < train.net.mlp.size(); ++i) out << (i ? "," : "") << train.net.mlp[i];
  out << "\n";
  return out.str();
}

envs::Environment resolve_environment(const ExperimentSpec& spec) {
  try {
    if (!spec.pomdp_file.empty()) return envs::load_pomdp_file(spec.pomdp_file);
    return envs::make_environment(spec.env);
  } catch (const envs::PomdpSyntaxError& e) {
    throw ConfigError(e.what());
  } catch (const envs::PomdpSemanticError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

History parse_history(const std::string& text) {
  History h;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ';')) parts.push_back(trim(tok));
  if (!text.empty() && text.back() == ';') parts.push_back("");
  auto to_int = [&text](const std::string& s) {
    std::size_t used = 0;
    int v = -1;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || v < 0) throw ConfigError("malformed history '" + text + "'");
    return v;
  };
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i == 0) {
      if (!parts[0].empty()) h.initial_observation = to_int(parts[0]);
      continue;
    }
    const auto comma = parts[i].find(',');
    if (comma == std::string::npos) throw ConfigError("malformed history step '" + parts[i] + "'");
    h = h.extended(to_int(trim(parts[i].substr(0, comma))), to_int(trim(parts[i].substr(comma + 1))));
  }
  return h;
}

std::string format_history(const History& h) {
  std::string out = h.initial_observation ? std::to_string(*h.initial_observation) : "";
  for (const auto& s : h.steps) out += ";" + std::to_string(s.action) + "," + std::to_string(s.observation);
  return out;
}

}  // namespace asymac::harness
