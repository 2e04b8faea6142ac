#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "asymac/harness.hpp"

namespace asymac::harness {

namespace fs = std::filesystem;

namespace {

std::pair<double, double> mean_sem(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

}  // namespace

std::vector<AggregatePoint> aggregate_curves(const std::vector<agent::LearningCurve>& curves, long long bucket) {
  if (bucket < 1) throw ContractViolation("aggregate bucket must be positive");
  long long last = 0;
  for (const auto& c : curves)
    if (!c.points.empty()) last = std::max(last, c.points.back().timestep);
  std::vector<AggregatePoint> out;
  const long long n_buckets = (last + bucket - 1) / bucket;
  std::vector<std::size_t> cursor(curves.size(), 0);
  for (long long b = 0; b < n_buckets; ++b) {
    const long long start = b * bucket;
    const long long end = start + bucket;
    std::vector<double> values;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const auto& pts = curves[i].points;
      if (pts.empty() || pts.back().timestep <= start) continue;
      while (cursor[i] < pts.size() && pts[cursor[i]].timestep <= end) ++cursor[i];
      if (cursor[i] == 0) continue;
      values.push_back(pts[cursor[i] - 1].rolling100);
    }
    if (values.empty()) continue;
    const auto [mean, sem] = mean_sem(values);
    out.push_back({end, static_cast<int>(values.size()), mean, sem});
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const auto env = resolve_environment(spec);
  try {
    spec.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  fs::create_directories(spec.out_dir);
  write_file((fs::path(spec.out_dir) / "manifest.cfg").string(),
             spec.to_config() + "\n[provenance]\nversion = " + version() + "\n");

  ExperimentResult result;
  result.spec = spec;
  result.runs.resize(spec.seeds.size());
  std::vector<nn::Checkpoint> checkpoints(spec.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < spec.seeds.size(); i = next++) {
      agent::TrainConfig cfg = spec.train;
      cfg.seed = spec.seeds[i];
      result.runs[i].seed = cfg.seed;
      result.runs[i].result = agent::train(env, spec.kind, cfg, &checkpoints[i]);
    }
  };
  const int n_workers = std::max(1, std::min<int>(spec.workers, static_cast<int>(spec.seeds.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<agent::LearningCurve> curves;
  std::vector<double> finals;
  std::ostringstream summary;
  summary << "seed,timesteps,episodes,final_rolling100,diverged\n";
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    const std::string tag = "seed" + std::to_string(run.seed);
    write_file((fs::path(spec.out_dir) / ("curve_" + tag + ".csv")).string(), curve_csv(run.result.curve));
    checkpoints[i].save((fs::path(spec.out_dir) / ("checkpoint_" + tag + ".txt")).string());
    if (run.result.diverged) {
      result.any_diverged = true;
      write_file((fs::path(spec.out_dir) / ("divergence_" + tag + ".txt")).string(), run.result.divergence);
    }
    curves.push_back(run.result.curve);
    finals.push_back(run.result.curve.final_rolling100());
    summary << run.seed << "," << run.result.timesteps << "," << run.result.curve.points.size() << ","
            << format_double(run.result.curve.final_rolling100()) << "," << (run.result.diverged ? 1 : 0) << "\n";
  }
  result.aggregate = aggregate_curves(curves);
  std::tie(result.mean_final, result.sem_final) = mean_sem(finals);
  write_file((fs::path(spec.out_dir) / "aggregate.csv").string(), aggregate_csv(result.aggregate));
  write_file((fs::path(spec.out_dir) / "summary.csv").string(), summary.str());
  return result;
}

void rank_cells(std::vector<GridCell>& cells) {
  std::stable_sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    if (a.hp.lr_actor != b.hp.lr_actor) return a.hp.lr_actor < b.hp.lr_actor;
    if (a.hp.lr_critic != b.hp.lr_critic) return a.hp.lr_critic < b.hp.lr_critic;
    return a.hp.lambda0 < b.hp.lambda0;
  });
}

std::vector<GridCell> grid_search(const GridSearchSpec& grid) {
  if (grid.cells() == 0) throw ConfigError("grid search needs at least one cell");
  std::vector<GridCell> cells;
  int index = 0;
  for (double a : grid.lr_actor) {
    for (double c : grid.lr_critic) {
      for (double l : grid.lambda0) {
        ExperimentSpec spec = grid.base;
        spec.train.lr_actor = a;
        spec.train.lr_critic = c;
        spec.train.lambda0 = l;
        spec.out_dir = (fs::path(grid.base.out_dir) / ("cell_" + std::to_string(index++))).string();
        const auto res = run_experiment(spec);
        cells.push_back({{a, c, l}, spec.out_dir, res.mean_final, res.sem_final, res.any_diverged});
      }
    }
  }
  rank_cells(cells);
  std::ostringstream out;
  out << "rank,lr_actor,lr_critic,lambda0,mean_final_rolling100,sem,diverged,dir\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    out << i + 1 << "," << format_double(c.hp.lr_actor) << "," << format_double(c.hp.lr_critic) << ","
        << format_double(c.hp.lambda0) << "," << format_double(c.mean) << "," << format_double(c.sem) << ","
        << (c.any_diverged ? 1 : 0) << "," << c.dir << "\n";
  }
  fs::create_directories(grid.base.out_dir);
  write_file((fs::path(grid.base.out_dir) / "ranking.csv").string(), out.str());
  return cells;
}

std::string curve_csv(const agent::LearningCurve& curve) {
  std::string out = "timestep,episode,return,rolling100\n";
  for (const auto& p : curve.points)
    out += std::to_string(p.timestep) + "," + std::to_string(p.episode) + "," + format_double(p.episode_return) + "," +
           format_double(p.rolling100) + "\n";
  return out;
}

std::string aggregate_csv(const std::vector<AggregatePoint>& points) {
  std::string out = "bucket_end,runs,mean,sem\n";
  for (const auto& p : points)
    out += std::to_string(p.bucket_end) + "," + std::to_string(p.runs) + "," + format_double(p.mean) + "," +
           format_double(p.sem) + "\n";
  return out;
}

std::string bias_csv(const oracle::BiasReport& r) {
  std::string out = "v_h,e_vhs,gap_hs,e_vs,gap_state\n";
  out += format_double(r.v_h) + "," + format_double(r.e_vhs) + "," + format_double(r.gap_hs) + ",";
  out += (r.e_vs ? format_double(*r.e_vs) : std::string()) + ",";
  out += (r.gap_state ? format_double(*r.gap_state) : std::string()) + "\n";
  return out;
}

std::string probe_csv(const std::vector<ProbeRecord>& records) {
  std::string out = "timestep,probe_id,kind,value\n";
  for (const auto& r : records)
    out += std::to_string(r.timestep) + "," + r.probe_id + "," + r.kind + "," + format_double(r.value) + "\n";
  return out;
}

}  // namespace asymac::harness
