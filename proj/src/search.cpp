#include "esncv/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool usable(const PointReport& p) {
  return p.report && std::isfinite(p.report->mean_val) && !p.report->final_models.empty();
}

}  // namespace

void GridSpec::validate() const {
  if (alphas.empty() || rhos.empty() || betas.empty() || seeds.empty()) {
    throw config_error("grid: alphas, rhos, betas and seeds must all be non-empty");
  }
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw config_error("grid: alpha " + std::to_string(a) + " outside (0, 1]");
  }
  for (double r : rhos) {
    if (!(r > 0.0)) throw config_error("grid: rho must be > 0");
  }
  for (double b : betas) {
    if (!(b >= 0.0)) throw config_error("grid: beta must be >= 0");
  }
  if (n_x < 1) throw config_error("grid: n_x must be >= 1");
}

double PointReport::mean_val() const { return report ? report->mean_val : kInf; }

CellStats aggregate_runs(const std::vector<double>& values) {
  CellStats out;
  out.count = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) {
    out.single_sample = true;
    return out;
  }
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return out;
}

std::optional<std::size_t> select_best(const std::vector<PointReport>& points,
                                       const std::vector<std::size_t>& candidates) {
  std::optional<std::size_t> best;
  for (std::size_t i : candidates) {
    const PointReport& p = points[i];
    if (!usable(p)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const PointReport& b = points[*best];
    const double pv = p.mean_val(), bv = b.mean_val();
    const double pb = p.report->retrain_beta, bb = b.report->retrain_beta;
    const bool better =
        pv < bv ||
        (pv == bv && (pb > bb || (pb == bb && (p.point.rho < b.point.rho ||
                                                (p.point.rho == b.point.rho && p.point.alpha < b.point.alpha)))));
    if (better) best = i;
  }
  return best;
}

SearchResult grid_search(const TaskData& data, const SplitPlan& plan, const GridSpec& grid, Backend backend,
                         const SearchOptions& options) {
  grid.validate();
  SearchResult result;
  for (std::uint64_t seed : grid.seeds) {
    for (double a : grid.alphas) {
      for (double r : grid.rhos) result.points.push_back({{a, r, seed}, std::nullopt, {}});
    }
  }

  auto run_point = [&](PointReport& p) {
    ReservoirConfig config;
    config.n_x = grid.n_x;
    config.n_u = data.n_u();
    config.alpha = p.point.alpha;
    config.rho = p.point.rho;
    config.w_density = grid.w_density;
    config.input_scale = grid.input_scale;
    config.seed = p.point.seed;
    EvalOptions eval = options.eval;
    if (options.shuffle_sequences_per_seed && data.kind == TaskKind::classification) {
      eval.sequence_order_seed = p.point.seed;
    }
    try {
      const ReservoirWeights weights = generate_weights(config);
      p.report = evaluate(data, plan, config, weights, grid.betas, backend, eval);
    } catch (const error& e) {
      p.failure = e.what();
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned jobs = std::min<unsigned>(options.jobs ? options.jobs : hw,
                                           static_cast<unsigned>(result.points.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.points.size(); i = next++) run_point(result.points[i]);
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  // Pooled choice: mean over seeds of each (alpha, rho) cell.
  const std::size_t cells = grid.alphas.size() * grid.rhos.size();
  double best_score = kInf;
  std::optional<std::size_t> best_cell;
  for (std::size_t c = 0; c < cells; ++c) {
    double sum = 0.0, beta_sum = 0.0;
    for (std::size_t s = 0; s < grid.seeds.size(); ++s) {
      const PointReport& p = result.points[s * cells + c];
      sum += usable(p) ? p.mean_val() : kInf;
      beta_sum += p.report ? p.report->retrain_beta : 0.0;
    }
    const double score = sum / static_cast<double>(grid.seeds.size());
    if (!std::isfinite(score)) continue;
    bool better = !best_cell || score < best_score;
    if (best_cell && score == best_score) {
      double best_beta_sum = 0.0;
      for (std::size_t s = 0; s < grid.seeds.size(); ++s) {
        const PointReport& p = result.points[s * cells + *best_cell];
        best_beta_sum += p.report ? p.report->retrain_beta : 0.0;
      }
      const GridPoint& a = result.points[c].point;
      const GridPoint& b = result.points[*best_cell].point;
      better = beta_sum > best_beta_sum ||
               (beta_sum == best_beta_sum && (a.rho < b.rho || (a.rho == b.rho && a.alpha < b.alpha)));
    }
    if (better) {
      best_cell = c;
      best_score = score;
    }
  }
  if (best_cell) {
    result.best_alpha = result.points[*best_cell].point.alpha;
    result.best_rho = result.points[*best_cell].point.rho;
    result.best_mean_val = best_score;
  }

  // Per-seed choice, the way each independent run would pick its model.
  std::vector<double> vals;
  std::map<FinalMethod, std::vector<double>> tests, wrongs;
  for (std::size_t s = 0; s < grid.seeds.size(); ++s) {
    std::vector<std::size_t> candidates(cells);
    for (std::size_t c = 0; c < cells; ++c) candidates[c] = s * cells + c;
    const auto best = select_best(result.points, candidates);
    if (!best) continue;
    result.per_seed_best.push_back(*best);
    const EvaluationReport& r = *result.points[*best].report;
    vals.push_back(r.mean_val);
    for (const auto& [method, score] : r.test_scores) {
      tests[method].push_back(score.nrmse);
      if (score.misclassifications) wrongs[method].push_back(static_cast<double>(*score.misclassifications));
      result.test_divergent[method] += score.divergent;
    }
  }
  if (result.per_seed_best.empty()) {
    std::string why = result.points.empty() ? std::string("empty grid") : result.points.front().failure;
    throw error("grid_search: every grid point failed or diverged" + (why.empty() ? "" : " (" + why + ")"));
  }
  result.val = aggregate_runs(vals);
  for (const auto& [method, v] : tests) result.test_nrmse[method] = aggregate_runs(v);
  for (const auto& [method, v] : wrongs) result.test_misclassifications[method] = aggregate_runs(v);
  return result;
}

}  // namespace esncv
