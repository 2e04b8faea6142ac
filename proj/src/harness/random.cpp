#include "asymac/harness.hpp"

namespace asymac::harness {

namespace {

// Random distribution over n entries; each entry is zeroed with probability
// `sparsity` (at least one survives).
std::vector<double> random_distribution(Rng& rng, int n, double sparsity = 0.3) {
  std::vector<double> w(n);
  double z = 0.0;
  for (double& v : w) {
    v = rng.uniform() < sparsity ? 0.0 : 0.05 + rng.uniform();
    z += v;
  }
  if (z == 0.0) {
    w[rng.next_u64() % static_cast<std::uint64_t>(n)] = 1.0;
    z = 1.0;
  }
  for (double& v : w) v /= z;
  return w;
}

SparseRow to_sparse(const std::vector<double>& d) {
  SparseRow row;
  for (int i = 0; i < static_cast<int>(d.size()); ++i)
    if (d[i] > 0.0) row.emplace_back(i, d[i]);
  return row;
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

Pomdp random_pomdp(Rng& rng, const RandomShape& shape) {
  Pomdp p = Pomdp::with_dimensions(uniform_int(rng, 2, shape.max_states), uniform_int(rng, 2, shape.max_actions),
                                   uniform_int(rng, 2, shape.max_obs), 0.5 + 0.45 * rng.uniform());
  p.initial = random_distribution(rng, p.n_states, 0.2);
  std::vector<std::vector<double>> emission(p.n_states);
  for (auto& e : emission) e = random_distribution(rng, p.n_obs);
  for (int s = 0; s < p.n_states; ++s) {
    for (int a = 0; a < p.n_actions; ++a) {
      const auto t = random_distribution(rng, p.n_states);
      for (int next = 0; next < p.n_states; ++next) {
        if (t[next] == 0.0) continue;
        p.outcomes(s, a).push_back(
            {next, t[next], to_sparse(shape.state_only_observations ? emission[next] : random_distribution(rng, p.n_obs))});
      }
      p.R(s, a) = rng.uniform(-1.0, 1.0);
    }
  }
  if (rng.uniform() < 0.5) {
    p.initial_emission.resize(p.n_states);
    for (int s = 0; s < p.n_states; ++s) p.initial_emission[s] = to_sparse(emission[s]);
  }
  return p;
}

oracle::TabularPolicy random_historyful_policy(int n_actions, std::uint64_t salt) {
  return oracle::TabularPolicy::historyful(n_actions, [n_actions, salt](const History& h) {
    std::uint64_t x = salt;
    for (unsigned char c : h.key()) x = Rng::mix(x ^ c);
    std::vector<double> w(n_actions);
    double z = 0.0;
    for (double& v : w) {
      x = Rng::mix(x + 0x9e3779b97f4a7c15ULL);
      v = 0.05 + static_cast<double>(x >> 11) * 0x1.0p-53;
      z += v;
    }
    for (double& v : w) v /= z;
    return w;
  });
}

oracle::TabularPolicy random_softmax_policy(const Pomdp& p, int depth, Rng& rng) {
  oracle::TabularPolicy::Theta theta;
  for (const auto& [h, prob] : oracle::realizable_histories(p, depth - 1)) {
    std::vector<double> row(p.n_actions);
    for (double& v : row) v = rng.uniform(-2.0, 2.0);
    theta[h] = row;
  }
  return oracle::TabularPolicy::softmax(p.n_actions, theta);
}

}  // namespace asymac::harness
