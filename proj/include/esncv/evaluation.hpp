#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esncv/readout.hpp"
#include "esncv/reservoir.hpp"
#include "esncv/splits.hpp"

namespace esncv {

enum class TaskKind { generative, output, classification };
enum class Backend { naive, small_k, large_k };
enum class FinalMethod { averaged, best, retrained, ireg_retrained };
enum class NrmseNorm { per_dimension, pooled };

/// A time series task (inputs/targets aligned column by column, test suffix held out)
/// or a sequence classification task (train/test sequences with labels 1..n_classes).
struct TaskData {
  TaskKind kind = TaskKind::output;

  MatrixXd inputs;   // n_u x T
  MatrixXd targets;  // n_y x T
  Range test_range;

  std::vector<MatrixXd> train_sequences;
  std::vector<int> train_labels;
  std::vector<MatrixXd> test_sequences;
  std::vector<int> test_labels;
  int n_classes = 0;
  AggregateMode aggregate = AggregateMode::last_state;

  Index n_u() const;
  Index n_y() const;
  /// Length of the region the validation plan covers (time steps or training sequences).
  Index trainval_len() const;
};

/// Generative task from a series (n x T): input u(n) = s(n), target = s(n + 1).
/// The last `test_len` targets form the test range.
TaskData make_generative_task(const MatrixXd& series, Index test_len);
TaskData make_output_task(const MatrixXd& inputs, const MatrixXd& targets, Index test_len);
TaskData make_classification_task(std::vector<MatrixXd> train_sequences, std::vector<int> train_labels,
                                  std::vector<MatrixXd> test_sequences, std::vector<int> test_labels,
                                  int n_classes, AggregateMode mode = AggregateMode::last_state);

/// Root-mean-square error over the target variance. per_dimension normalizes each
/// output row by its own variance and averages the ratios; pooled uses the variance
/// of all target entries. Throws contract_error on a constant target.
double nrmse(const MatrixXd& pred, const MatrixXd& target, NrmseNorm norm = NrmseNorm::per_dimension);

struct GenerativeScore {
  double nrmse = 0.0;
  bool divergent = false;
};

/// Closed-loop run from `warm_state`: the first input is val_inputs.col(0), every
/// later input is the previous output. Non-finite runs score +inf.
GenerativeScore score_generative(const Readout& readout, const ReservoirWeights& weights,
                                 const ReservoirConfig& config, const VectorXd& warm_state,
                                 const MatrixXd& val_inputs, const MatrixXd& val_targets, Index horizon,
                                 double divergence_factor = 1e6);

double score_output(const Readout& readout, const MatrixXd& x_ext_block, const MatrixXd& targets);

struct ClassificationScore {
  double nrmse = 0.0;
  Index misclassifications = 0;
};

/// One-hot (+1/0) targets; predicted class is the argmax, ties to the lowest index.
ClassificationScore score_classification(const Readout& readout, const MatrixXd& aggregated_states,
                                         const std::vector<int>& labels, int n_classes);

MatrixXd one_hot(const std::vector<int>& labels, int n_classes);

struct SplitResult {
  Index split_index = 0;
  std::optional<Readout> readout;   // at best_beta; empty when every beta failed numerically
  double val_score = 0.0;
  double best_beta = 0.0;
  std::vector<double> beta_scores;  // one per beta grid entry, +inf where the solve failed
  std::vector<std::optional<Readout>> beta_readouts;  // kept only when requested
  std::optional<Index> val_misclassifications;
  bool divergent = false;
  bool flagged = false;  // at least one beta failed numerically
  bool ill_conditioned = false;
};

struct EvalOptions {
  enum class Memory { retain_states, rerun };
  Memory memory = Memory::retain_states;
  BiasPolicy bias = BiasPolicy::exclude_first;
  double divergence_factor = 1e6;
  /// Per-segment statistics are cached while they fit in this many bytes.
  std::size_t segment_cache_bytes = std::size_t{256} << 20;
  bool keep_beta_readouts = false;
  /// Classification only: permute training sequences with this seed before splitting.
  std::optional<std::uint64_t> sequence_order_seed;
};

struct CrossValidation {
  std::vector<SplitResult> splits;
  SufficientStatistics trainval_stats;  // every usable trainval column; used for retraining
  std::vector<double> betas;
  Index woodbury_fallbacks = 0;
  std::map<std::string, double> timings_ms;
};

/// Validates every split of `plan` for every beta with the chosen backend.
/// naive re-runs the reservoir and re-accumulates statistics per split; small_k and
/// large_k run the reservoir once and subtract fold statistics from global ones
/// (large_k additionally applies Woodbury updates to a cached inverse).
CrossValidation cross_validate(const TaskData& data, const SplitPlan& plan, const ReservoirConfig& config,
                               const ReservoirWeights& weights, const std::vector<double>& betas,
                               Backend backend, const EvalOptions& options = {});

/// Beta minimizing the mean validation score over splits (ties to the larger beta).
double beta_best_on_average(const std::vector<SplitResult>& results, const std::vector<double>& betas);

Readout finalize(const std::vector<SplitResult>& results, FinalMethod method,
                 const SufficientStatistics& global_stats, const std::vector<double>& betas,
                 BiasPolicy policy = BiasPolicy::exclude_first);

enum class IregMode { averaged, retrained };
/// Individually regularized final models: averaged at per-split best betas, or
/// retrained at the arithmetic mean of the per-split best betas.
Readout ireg_finalize(const std::vector<SplitResult>& results, IregMode mode,
                      const SufficientStatistics& global_stats,
                      BiasPolicy policy = BiasPolicy::exclude_first);

struct TestScore {
  double nrmse = 0.0;
  std::optional<Index> misclassifications;
  bool divergent = false;
};

/// The single test protocol shared by every scheme: warm the reservoir on the whole
/// trainval region, then score the held-out suffix (closed loop for generative tasks).
class TestHarness {
 public:
  TestHarness(const TaskData& data, const ReservoirConfig& config, const ReservoirWeights& weights,
              double divergence_factor = 1e6);
  TestScore score(const Readout& readout) const;

 private:
  const TaskData* data_;
  const ReservoirConfig* config_;
  const ReservoirWeights* weights_;
  double divergence_factor_;
  VectorXd warm_state_;
  MatrixXd test_states_;
};

struct EvaluationReport {
  std::vector<SplitResult> per_split;
  double mean_val = 0.0;
  double retrain_beta = 0.0;
  double ireg_beta = 0.0;
  std::map<FinalMethod, Readout> final_models;
  std::map<FinalMethod, TestScore> test_scores;
  std::map<std::string, double> timings_ms;
  Index woodbury_fallbacks = 0;
  bool any_divergent = false;
};

/// cross_validate, then every final model, then the shared test protocol.
EvaluationReport evaluate(const TaskData& data, const SplitPlan& plan, const ReservoirConfig& config,
                          const ReservoirWeights& weights, const std::vector<double>& betas, Backend backend,
                          const EvalOptions& options = {});

std::string_view to_string(TaskKind k);
std::string_view to_string(Backend b);
std::string_view to_string(FinalMethod m);
TaskKind parse_task_kind(std::string_view s);
Backend parse_backend(std::string_view s);
FinalMethod parse_final_method(std::string_view s);

}  // namespace esncv
