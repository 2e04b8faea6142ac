#include "asymac/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asymac/pomdp.hpp"

namespace asymac::nn {

bool GradcheckReport::pass() const {
  return std::all_of(groups.begin(), groups.end(), [](const GroupCheck& g) { return g.pass; });
}

std::vector<std::string> GradcheckReport::failing_groups() const {
  std::vector<std::string> out;
  for (const auto& g : groups)
    if (!g.pass) out.push_back(g.name);
  return out;
}

double GradcheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
  return worst;
}

namespace {

double evaluate(const std::function<Var(Tape&)>& loss) {
  Tape tape(false);
  return loss(tape).scalar();
}

std::vector<Eigen::Index> sample_entries(Eigen::Index size, int count, Rng& rng) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(size));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  if (size <= count) return all;
  // Partial Fisher-Yates.
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(size - i));
    std::swap(all[i], all[j]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GradcheckReport gradcheck(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss,
                          const GradcheckOptions& options) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("gradcheck: tolerance must be positive");
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  Rng rng(options.seed);
  GradcheckReport report;
  for (auto* p : params) {
    GroupCheck group;
    group.name = p->name;
    const auto entries = sample_entries(p->size(), options.samples_per_group, rng);
    bool corrupted = false;
    for (Eigen::Index idx : entries) {
      double& w = p->value.data()[idx];
      const double saved = w;
      w = saved + options.step;
      const double up = evaluate(loss);
      w = saved - options.step;
      const double down = evaluate(loss);
      w = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      double analytic = p->grad.data()[idx];
      if (!corrupted && p->name == options.corrupt_group && analytic != 0.0) {
        analytic *= 2.0;
        corrupted = true;
      }
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++group.checked;
      if (rel > group.max_rel_error || group.worst_index < 0) {
        group.max_rel_error = std::max(group.max_rel_error, rel);
        group.worst_index = idx;
      }
    }
    group.pass = group.max_rel_error <= options.tolerance;
    report.groups.push_back(group);
  }
  for (auto* p : params) p->zero_grad();
  return report;
}

}  // namespace asymac::nn
