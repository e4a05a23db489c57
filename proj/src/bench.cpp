#include "esncv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

const std::vector<std::string> kPhases = {"total", "reservoir", "statistics", "solve", "validation"};

double fitted_slope(const std::vector<std::pair<double, double>>& xy) {
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : xy) {
    mx += std::log(x);
    my += std::log(y);
  }
  mx /= static_cast<double>(xy.size());
  my /= static_cast<double>(xy.size());
  double sxy = 0.0, sxx = 0.0;
  for (auto [x, y] : xy) {
    sxy += (std::log(x) - mx) * (std::log(y) - my);
    sxx += (std::log(x) - mx) * (std::log(x) - mx);
  }
  return sxy / sxx;
}

const BenchRow* find_row(const BenchTable& t, Backend b, Index n_r, Index k, const std::string& phase) {
  for (const BenchRow& r : t) {
    if (r.backend == b && r.n_r == n_r && r.k == k && r.phase == phase) return &r;
  }
  return nullptr;
}

}  // namespace

void BenchSpec::validate() const {
  if (repeats < 1) throw config_error("bench: repeats must be >= 1");
  if (T < 4) throw config_error("bench: T must be >= 4");
  if (sizes.empty() || folds.empty() || backends.empty()) throw config_error("bench: sizes, folds and backends must be non-empty");
  for (Index s : sizes) {
    if (s < 3) throw config_error("bench: reservoir size n_r must be >= 3 (bias, input, one neuron)");
  }
  for (Index k : folds) {
    if (k < 2 || k > T) throw config_error("bench: every k must lie in [2, T]; got " + std::to_string(k));
  }
  if (betas.empty()) throw config_error("bench: empty beta grid");
}

BenchTable run_bench(const BenchSpec& spec, const std::function<void(const BenchRow&)>& progress) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  MatrixXd series(1, spec.T + 2);
  for (Index i = 0; i < series.cols(); ++i) series(0, i) = noise(rng);
  const TaskData task = make_generative_task(series, 1);

  EvalOptions options;  // keeps all states in memory, the speed-favouring mode
  BenchTable table;
  for (Index n_r : spec.sizes) {
    ReservoirConfig config;
    config.n_x = n_r - 2;
    config.n_u = 1;
    config.alpha = spec.alpha;
    config.rho = spec.rho;
    config.seed = spec.seed;
    const ReservoirWeights weights = generate_weights(config);
    for (Backend backend : spec.backends) {
      for (Index k : spec.folds) {
        SchemeSpec scheme;
        scheme.scheme = Scheme::cv;
        scheme.k = k;
        const SplitPlan plan = plan_splits(scheme, task.trainval_len(), 0);

        std::map<std::string, std::vector<double>> samples;
        for (Index rep = -1; rep < spec.repeats; ++rep) {
          const auto start = std::chrono::steady_clock::now();
          const CrossValidation cv = cross_validate(task, plan, config, weights, spec.betas, backend, options);
          const double total =
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
          if (rep < 0) continue;  // warm-up
          samples["total"].push_back(total);
          for (const std::string& phase : kPhases) {
            if (phase == "total") continue;
            const auto it = cv.timings_ms.find(phase);
            samples[phase].push_back(it == cv.timings_ms.end() ? 0.0 : it->second);
          }
        }
        for (const std::string& phase : kPhases) {
          const auto& v = samples[phase];
          BenchRow row{backend, n_r, k, phase, 0.0, *std::min_element(v.begin(), v.end())};
          for (double x : v) row.mean_ms += x;
          row.mean_ms /= static_cast<double>(v.size());
          table.push_back(row);
          if (progress) progress(row);
        }
      }
    }
  }
  return table;
}

ScalingVerdict check_scaling(const BenchTable& table) {
  ScalingVerdict v;
  std::set<Index> ks, sizes;
  for (const BenchRow& r : table) {
    ks.insert(r.k);
    sizes.insert(r.n_r);
  }
  if (ks.size() < 4 || static_cast<double>(*ks.rbegin()) < 8.0 * static_cast<double>(*ks.begin())) {
    v.status = ScalingVerdict::Status::inconclusive;
    v.lines.push_back("inconclusive: need >= 4 fold counts spanning >= 8x (have " + std::to_string(ks.size()) + ")");
    return v;
  }
  bool ok = true;
  bool measured = false;
  for (Index n_r : sizes) {
    std::vector<std::pair<double, double>> naive;
    std::vector<double> reservoir;
    for (Index k : ks) {
      if (const BenchRow* r = find_row(table, Backend::naive, n_r, k, "total")) {
        naive.emplace_back(static_cast<double>(k), std::max(r->min_ms, 1e-6));
      }
      if (const BenchRow* r = find_row(table, Backend::small_k, n_r, k, "reservoir")) reservoir.push_back(r->min_ms);
    }
    if (naive.size() >= 4) {
      measured = true;
      const double slope = fitted_slope(naive);
      v.naive_slope[n_r] = slope;
      ok = ok && slope >= 0.8;
      v.lines.push_back("(a) n_r=" + std::to_string(n_r) + ": naive log-log slope " + std::to_string(slope) +
                        (slope >= 0.8 ? " >= 0.8 ok" : " < 0.8 FAIL"));
    }
    if (reservoir.size() >= 4) {
      measured = true;
      const auto [lo, hi] = std::minmax_element(reservoir.begin(), reservoir.end());
      const double ratio = *hi / std::max(*lo, 1e-9);
      v.small_k_reservoir_ratio[n_r] = ratio;
      ok = ok && ratio <= 1.5;
      v.lines.push_back("(b) n_r=" + std::to_string(n_r) + ": small_k reservoir phase max/min " +
                        std::to_string(ratio) + (ratio <= 1.5 ? " <= 1.5 ok" : " > 1.5 FAIL"));
    }
  }
  const Index k_max = *ks.rbegin();
  const Index n_max = *sizes.rbegin();
  const BenchRow* large = find_row(table, Backend::large_k, n_max, k_max, "total");
  const BenchRow* small = find_row(table, Backend::small_k, n_max, k_max, "total");
  if (large && small) {
    measured = true;
    v.large_vs_small = large->min_ms / small->min_ms;
    const bool faster = large->min_ms < small->min_ms;
    ok = ok && faster;
    v.lines.push_back("(c) n_r=" + std::to_string(n_max) + ", k=" + std::to_string(k_max) + ": large_k " +
                      std::to_string(large->min_ms) + " ms vs small_k " + std::to_string(small->min_ms) + " ms" +
                      (faster ? " ok" : " FAIL"));
  }
  if (!measured) {
    v.lines.push_back("inconclusive: the table has none of the backends the checks compare");
    return v;
  }
  v.status = ok ? ScalingVerdict::Status::pass : ScalingVerdict::Status::fail;
  return v;
}

std::string to_string(ScalingVerdict::Status s) {
  switch (s) {
    case ScalingVerdict::Status::pass: return "pass";
    case ScalingVerdict::Status::fail: return "fail";
    case ScalingVerdict::Status::inconclusive: return "inconclusive";
  }
  return "?";
}

}  // namespace esncv
