#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esncv/evaluation.hpp"

namespace esncv {

struct GridSpec {
  std::vector<double> alphas;
  std::vector<double> rhos;
  std::vector<double> betas;
  Index n_x = 50;
  std::vector<std::uint64_t> seeds;
  double input_scale = 1.0;
  std::optional<double> w_density;

  void validate() const;
};

struct GridPoint {
  double alpha = 0.0;
  double rho = 0.0;
  std::uint64_t seed = 0;
};

struct PointReport {
  GridPoint point;
  std::optional<EvaluationReport> report;  // empty when weight generation or evaluation failed
  std::string failure;

  double mean_val() const;
};

/// Mean and sample standard deviation of a set of runs.
struct CellStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
  bool single_sample = false;
};

CellStats aggregate_runs(const std::vector<double>& values);

struct SearchOptions {
  unsigned jobs = 0;  // 0: hardware concurrency
  EvalOptions eval;
  /// Classification: each seed also draws its own training-sequence order.
  bool shuffle_sequences_per_seed = false;
};

struct SearchResult {
  std::vector<PointReport> points;  // ordered seed-major, then alpha, then rho
  /// (alpha, rho) minimizing the validation score averaged over seeds.
  double best_alpha = 0.0;
  double best_rho = 0.0;
  double best_mean_val = 0.0;
  /// Each seed's own argmin point (index into points); test statistics aggregate these.
  std::vector<std::size_t> per_seed_best;
  CellStats val;
  std::map<FinalMethod, CellStats> test_nrmse;
  std::map<FinalMethod, CellStats> test_misclassifications;
  std::map<FinalMethod, std::size_t> test_divergent;  // selected runs whose test output diverged
};

/// Grid search over (alpha, rho) x seed with beta swept inside every evaluation.
/// Ties prefer the larger beta, then the smaller rho, then the smaller alpha.
/// Throws error when every point failed or diverged.
SearchResult grid_search(const TaskData& data, const SplitPlan& plan, const GridSpec& grid, Backend backend,
                         const SearchOptions& options = {});

/// Index of the winning point among `candidates` under the tie-breaking rule.
std::optional<std::size_t> select_best(const std::vector<PointReport>& points,
                                       const std::vector<std::size_t>& candidates);

}  // namespace esncv
