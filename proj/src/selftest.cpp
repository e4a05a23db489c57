#include "esncv/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace esncv {
namespace {

double rel_error(const MatrixXd& w, const MatrixXd& ref) {
  const double denom = ref.norm();
  return denom > 0.0 ? (w - ref).norm() / denom : (w - ref).norm();
}

void record(EquivalenceResult& result, EquivalenceCase c) {
  c.tolerance = equivalence_tolerance(c.beta);
  c.pass = std::isfinite(c.max_rel_error) && c.max_rel_error <= c.tolerance;
  result.max_rel_error = std::max(result.max_rel_error, c.max_rel_error);
  result.cases.push_back(c);
}

}  // namespace

double equivalence_tolerance(double beta) { return beta >= 1e-6 ? 1e-8 : 1e-6; }

EquivalenceResult backend_equivalence(const EquivalenceSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  MatrixXd series(1, spec.T + 2);
  for (Index i = 0; i < series.cols(); ++i) series(0, i) = uniform(rng);
  const TaskData task = make_generative_task(series, 1);

  ReservoirConfig config;
  config.n_x = spec.n_r - 2;
  config.alpha = 0.5;
  config.rho = 0.9;
  config.seed = spec.seed;
  const ReservoirWeights weights = generate_weights(config);

  EvalOptions options;
  options.keep_beta_readouts = true;

  const StateHarvest states = harvest(weights, config, task.inputs.leftCols(spec.T), VectorXd::Zero(config.n_x), 0);
  const MatrixXd& x = states.x_ext;
  const MatrixXd y = task.targets.leftCols(spec.T);
  SufficientStatistics global = SufficientStatistics::zeros(x.rows(), y.rows());
  accumulate(global, x, y);

  EquivalenceResult result;
  for (Index k : spec.folds) {
    SchemeSpec scheme;
    scheme.scheme = Scheme::cv;
    scheme.k = k;
    const SplitPlan plan = plan_splits(scheme, spec.T, 0);

    const CrossValidation naive = cross_validate(task, plan, config, weights, spec.betas, Backend::naive, options);
    for (Backend backend : {Backend::small_k, Backend::large_k}) {
      const CrossValidation fast = cross_validate(task, plan, config, weights, spec.betas, backend, options);
      for (std::size_t b = 0; b < spec.betas.size(); ++b) {
        EquivalenceCase c{"cross_validate", backend, k, spec.betas[b]};
        for (std::size_t s = 0; s < plan.splits.size(); ++s) {
          const auto& ref = naive.splits[s].beta_readouts[b];
          const auto& got = fast.splits[s].beta_readouts[b];
          const double err = (ref && got) ? rel_error(got->w_out, ref->w_out) : std::numeric_limits<double>::infinity();
          c.max_rel_error = std::max(c.max_rel_error, err);
        }
        record(result, c);
      }
    }

    for (double beta : spec.betas) {
      SufficientStatistics cached = global;
      cache_inverse(cached, beta);
      EquivalenceCase subtract{"kernel", Backend::small_k, k, beta};
      EquivalenceCase woodbury{"kernel", Backend::large_k, k, beta};
      bool woodbury_used = false;
      for (const Split& split : plan.splits) {
        const Range v = split.val_range;
        const MatrixXd x_train = (MatrixXd(x.rows(), spec.T - v.size()) << x.leftCols(v.begin),
                                  x.rightCols(spec.T - v.end)).finished();
        const MatrixXd y_train = (MatrixXd(y.rows(), spec.T - v.size()) << y.leftCols(v.begin),
                                  y.rightCols(spec.T - v.end)).finished();
        const Readout ref = split_readout_naive(std::span(&x_train, 1), std::span(&y_train, 1), beta);

        FoldStatistics fold = FoldStatistics::zeros(x.rows(), y.rows());
        accumulate(fold, x.middleCols(v.begin, v.size()), y.middleCols(v.begin, v.size()));
        fold.x_i = x.middleCols(v.begin, v.size());
        if (spec.sabotage) {
          fold.g_i = -fold.g_i;
          fold.p_i = -fold.p_i;
        }
        subtract.max_rel_error =
            std::max(subtract.max_rel_error, rel_error(split_readout_subtract(global, fold, beta).w_out, ref.w_out));
        if (v.size() < x.rows()) {
          woodbury_used = true;
          double err = std::numeric_limits<double>::infinity();
          try {
            err = rel_error(split_readout_woodbury(cached, fold, beta).w_out, ref.w_out);
          } catch (const std::exception&) {
          }
          woodbury.max_rel_error = std::max(woodbury.max_rel_error, err);
        }
      }
      record(result, subtract);
      if (woodbury_used) record(result, woodbury);
    }
  }
  result.pass = std::all_of(result.cases.begin(), result.cases.end(), [](const EquivalenceCase& c) { return c.pass; });
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace esncv
