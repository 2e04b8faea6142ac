#include <algorithm>
#include <cmath>

#include "asymac/oracle.hpp"

namespace asymac::oracle {

TabularPolicy TabularPolicy::reactive(std::vector<std::vector<double>> rows, std::vector<double> no_obs_row) {
  if (rows.empty()) throw ContractViolation("reactive policy needs at least one observation row");
  TabularPolicy pi;
  pi.kind_ = Kind::Reactive;
  pi.n_actions_ = static_cast<int>(rows.front().size());
  for (const auto& row : rows) check_distribution(row, static_cast<std::size_t>(pi.n_actions_), "reactive policy row");
  if (no_obs_row.empty()) no_obs_row.assign(pi.n_actions_, 1.0 / pi.n_actions_);
  check_distribution(no_obs_row, static_cast<std::size_t>(pi.n_actions_), "reactive policy row");
  pi.rows_ = std::move(rows);
  pi.no_obs_row_ = std::move(no_obs_row);
  return pi;
}

TabularPolicy TabularPolicy::historyful(int n_actions, std::function<std::vector<double>(const History&)> fn) {
  TabularPolicy pi;
  pi.kind_ = Kind::Historyful;
  pi.n_actions_ = n_actions;
  pi.fn_ = std::move(fn);
  return pi;
}

TabularPolicy TabularPolicy::softmax(int n_actions, Theta theta) {
  for (const auto& [h, row] : theta)
    if (static_cast<int>(row.size()) != n_actions) throw ContractViolation("softmax policy: logit row has wrong width");
  TabularPolicy pi;
  pi.kind_ = Kind::Softmax;
  pi.n_actions_ = n_actions;
  pi.theta_ = std::move(theta);
  return pi;
}

TabularPolicy TabularPolicy::last_observation(int n_symbols) {
  std::vector<std::vector<double>> rows(n_symbols, std::vector<double>(n_symbols, 0.0));
  for (int o = 0; o < n_symbols; ++o) rows[o][o] = 1.0;
  return reactive(std::move(rows));
}

std::vector<double> TabularPolicy::probabilities(const History& h) const {
  switch (kind_) {
    case Kind::Reactive: {
      const auto o = h.last_observation();
      return o ? reactive_row(*o) : no_obs_row_;
    }
    case Kind::Historyful: {
      auto probs = fn_(h);
      check_distribution(probs, static_cast<std::size_t>(n_actions_), "historyful policy");
      return probs;
    }
    case Kind::Softmax: {
      std::vector<double> probs(n_actions_, 1.0 / n_actions_);
      auto it = theta_.find(h);
      if (it == theta_.end()) return probs;
      const auto& logits = it->second;
      const double m = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (int a = 0; a < n_actions_; ++a) z += probs[a] = std::exp(logits[a] - m);
      for (double& p : probs) p /= z;
      return probs;
    }
  }
  return {};
}

std::string TabularPolicy::context(const History& h) const {
  if (kind_ == Kind::Reactive) {
    const auto o = h.last_observation();
    const std::int32_t v = o ? *o : -1;
    return std::string(reinterpret_cast<const char*>(&v), sizeof v);
  }
  return h.key();
}

const std::vector<double>& TabularPolicy::reactive_row(int o) const {
  if (kind_ != Kind::Reactive) throw ContractViolation("reactive_row on a non-reactive policy");
  if (o == -1) return no_obs_row_;
  if (o < 0 || o >= static_cast<int>(rows_.size())) throw ContractViolation("reactive policy: observation out of range");
  return rows_[o];
}

HistoryPolicy TabularPolicy::as_function() const {
  return [self = *this](const History& h) { return self.probabilities(h); };
}

}  // namespace asymac::oracle
