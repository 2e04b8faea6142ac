#include <sstream>

#include "asymac/agent.hpp"

namespace asymac::agent {

namespace {

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

void add_adam(nn::Checkpoint& ck, const std::string& prefix, nn::Adam& adam) {
  ck.meta[prefix + ".steps"] = std::to_string(adam.steps());
  const auto& params = adam.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.add(prefix + ".m." + params[i]->name, adam.first_moments()[i]);
    ck.add(prefix + ".v." + params[i]->name, adam.second_moments()[i]);
  }
}

void read_adam(const nn::Checkpoint& ck, const std::string& prefix, nn::Adam& adam) {
  adam.set_steps(std::stoll(ck.get(prefix + ".steps")));
  const auto& params = adam.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam.first_moments()[i] = ck.tensor(prefix + ".m." + params[i]->name);
    adam.second_moments()[i] = ck.tensor(prefix + ".v." + params[i]->name);
  }
}

}  // namespace

nn::Checkpoint save_checkpoint(AgentNets& nets, Optimizers& opt, const std::string& env_name, long long timestep) {
  nn::Checkpoint ck;
  ck.meta["env"] = env_name;
  ck.meta["kind"] = short_name(nets.kind());
  ck.meta["timestep"] = std::to_string(timestep);
  ck.meta["n_states"] = std::to_string(nets.n_states());
  ck.meta["n_actions"] = std::to_string(nets.n_actions());
  ck.meta["n_obs"] = std::to_string(nets.n_obs());
  ck.meta["embedding"] = std::to_string(nets.config().embedding);
  ck.meta["hidden"] = std::to_string(nets.config().hidden);
  ck.meta["mlp"] = join(nets.config().mlp);
  for (auto* p : nets.all_parameters()) ck.add(p->name, p->value);
  add_adam(ck, "adam.actor", opt.actor);
  add_adam(ck, "adam.critic", opt.critic);
  return ck;
}

AgentNets load_nets(const nn::Checkpoint& ck, const Pomdp& pomdp) {
  if (std::stoi(ck.get("n_states")) != pomdp.n_states || std::stoi(ck.get("n_actions")) != pomdp.n_actions ||
      std::stoi(ck.get("n_obs")) != pomdp.n_obs)
    throw nn::CheckpointError("checkpoint dimensions do not match the environment");
  NetConfig cfg;
  cfg.embedding = std::stoi(ck.get("embedding"));
  cfg.hidden = std::stoi(ck.get("hidden"));
  cfg.mlp = split_ints(ck.get("mlp"));
  AgentNets nets(pomdp, parse_critic_kind(ck.get("kind")), cfg, 0);
  for (auto* p : nets.all_parameters()) {
    const nn::Matrix& m = ck.tensor(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw nn::CheckpointError("tensor '" + p->name + "' has the wrong shape");
    p->value = m;
  }
  return nets;
}

void load_optimizers(const nn::Checkpoint& ck, AgentNets&, Optimizers& opt) {
  read_adam(ck, "adam.actor", opt.actor);
  read_adam(ck, "adam.critic", opt.critic);
}

}  // namespace asymac::agent
