#include "esncv/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class PhaseTimer {
 public:
  PhaseTimer(std::map<std::string, double>& sink, std::string phase)
      : sink_(sink), phase_(std::move(phase)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    sink_[phase_] += std::chrono::duration<double, std::milli>(elapsed).count();
  }
  PhaseTimer(const PhaseTimer&) = delete;
  PhaseTimer& operator=(const PhaseTimer&) = delete;

 private:
  std::map<std::string, double>& sink_;
  std::string phase_;
  std::chrono::steady_clock::time_point start_;
};

double sanitize(double score) { return std::isnan(score) ? kInf : score; }

std::vector<Range> excluded_ranges(const Split& split, Range usable) {
  std::vector<Range> train = split.train_segments;
  std::sort(train.begin(), train.end(), [](const Range& a, const Range& b) { return a.begin < b.begin; });
  std::vector<Range> out;
  Index cursor = usable.begin;
  for (const Range& r : train) {
    if (r.begin > cursor) out.push_back({cursor, r.begin});
    cursor = std::max(cursor, r.end);
  }
  if (cursor < usable.end) out.push_back({cursor, usable.end});
  return out;
}

Index total_size(const std::vector<Range>& ranges) {
  Index n = 0;
  for (const Range& r : ranges) n += r.size();
  return n;
}

MatrixXd gather(const MatrixXd& cols, const std::vector<Range>& ranges, Index offset) {
  MatrixXd out(cols.rows(), total_size(ranges));
  Index at = 0;
  for (const Range& r : ranges) {
    out.middleCols(at, r.size()) = cols.middleCols(r.begin - offset, r.size());
    at += r.size();
  }
  return out;
}

/// Extended states and targets of the usable region of one task under one reservoir,
/// produced by a single reservoir pass. Columns are served from memory or re-run
/// from the state saved at the nearest plan boundary.
class ColumnSource {
 public:
  ColumnSource(const TaskData& data, const SplitPlan& plan, const ReservoirConfig& config,
               const ReservoirWeights& weights, const EvalOptions& options,
               std::map<std::string, double>& timings, bool collect_stats = true)
      : data_(data), config_(config), weights_(weights), usable_{plan.washout, plan.trainval_len},
        collect_stats_(collect_stats) {
    boundaries_ = {usable_.begin, usable_.end};
    for (const Split& s : plan.splits) {
      for (const Range& r : s.train_segments) boundaries_.insert(boundaries_.end(), {r.begin, r.end});
      for (const Range& r : s.gap_ranges) boundaries_.insert(boundaries_.end(), {r.begin, r.end});
      boundaries_.insert(boundaries_.end(), {s.val_range.begin, s.val_range.end});
    }
    std::sort(boundaries_.begin(), boundaries_.end());
    boundaries_.erase(std::unique(boundaries_.begin(), boundaries_.end()), boundaries_.end());

    const Index n_r = config.n_r();
    const Index n_y = data.n_y();
    const std::size_t segments = boundaries_.size() - 1;
    cache_segments_ = segments * static_cast<std::size_t>(n_r * n_r + n_r * n_y) * sizeof(double) <=
                      options.segment_cache_bytes;
    global_ = SufficientStatistics::zeros(n_r, n_y);

    if (data.kind == TaskKind::classification) {
      if (plan.washout != 0) throw contract_error("classification plans must not use a washout");
      {
        PhaseTimer t(timings, "reservoir");
        x_ = aggregate_all(data.train_sequences);
      }
      y_ = one_hot(data.train_labels, data.n_classes);
      if (options.sequence_order_seed) {
        std::vector<Index> order(data.train_sequences.size());
        std::iota(order.begin(), order.end(), Index{0});
        std::mt19937_64 rng(*options.sequence_order_seed);
        std::shuffle(order.begin(), order.end(), rng);
        MatrixXd x(x_->rows(), x_->cols()), y(y_.rows(), y_.cols());
        for (std::size_t j = 0; j < order.size(); ++j) {
          x.col(static_cast<Index>(j)) = x_->col(order[j]);
          y.col(static_cast<Index>(j)) = y_.col(order[j]);
        }
        x_ = std::move(x);
        y_ = std::move(y);
      }
      PhaseTimer t(timings, "statistics");
      for (std::size_t j = 0; j < segments; ++j) add_segment(j, x_->middleCols(boundaries_[j], segment(j).size()));
      return;
    }

    // Time series: one teacher-forced pass over [0, trainval_len).
    if (options.memory == EvalOptions::Memory::retain_states) {
      StateHarvest h;
      {
        PhaseTimer t(timings, "reservoir");
        h = harvest(weights, config, data.inputs.leftCols(usable_.end), VectorXd::Zero(config.n_x), 0);
      }
      states_.reserve(boundaries_.size());
      for (Index b : boundaries_) {
        states_.push_back(b == 0 ? VectorXd::Zero(config.n_x) : VectorXd(h.x_ext.col(b - 1).tail(config.n_x)));
      }
      x_ = h.x_ext.rightCols(usable_.size());
      PhaseTimer t(timings, "statistics");
      if (!collect_stats_) return;
      if (cache_segments_) {
        for (std::size_t j = 0; j < segments; ++j) {
          add_segment(j, x_->middleCols(boundaries_[j] - usable_.begin, segment(j).size()));
        }
      } else {
        accumulate(global_, *x_, data.targets.middleCols(usable_.begin, usable_.size()));
      }
      return;
    }

    VectorXd state = VectorXd::Zero(config.n_x);
    {
      PhaseTimer t(timings, "reservoir");
      if (usable_.begin > 0) state = harvest(weights, config, data.inputs.leftCols(usable_.begin), state, 0).x_final;
    }
    states_.reserve(boundaries_.size());
    for (std::size_t j = 0; j < segments; ++j) {
      states_.push_back(state);
      const Range seg = segment(j);
      StateHarvest h;
      {
        PhaseTimer t(timings, "reservoir");
        h = harvest(weights, config, data.inputs.middleCols(seg.begin, seg.size()), state, 0);
      }
      PhaseTimer t(timings, "statistics");
      add_segment(j, h.x_ext);
      state = std::move(h.x_final);
    }
    states_.push_back(state);
  }

  const SufficientStatistics& global() const { return global_; }
  Range usable() const { return usable_; }

  MatrixXd states(const std::vector<Range>& ranges) const {
    if (x_) return gather(*x_, ranges, usable_.begin);
    MatrixXd out(config_.n_r(), total_size(ranges));
    Index at = 0;
    for (const Range& r : ranges) {
      out.middleCols(at, r.size()) =
          harvest(weights_, config_, data_.inputs.middleCols(r.begin, r.size()), state_before(r.begin), 0).x_ext;
      at += r.size();
    }
    return out;
  }

  MatrixXd targets(const std::vector<Range>& ranges) const {
    if (data_.kind == TaskKind::classification) return gather(y_, ranges, 0);
    return gather(data_.targets, ranges, 0);
  }

  const VectorXd& state_before(Index index) const {
    const auto it = std::lower_bound(boundaries_.begin(), boundaries_.end(), index);
    if (it == boundaries_.end() || *it != index || states_.empty()) {
      throw contract_error("no saved reservoir state at index " + std::to_string(index));
    }
    return states_[static_cast<std::size_t>(it - boundaries_.begin())];
  }

  /// Statistics of the given ranges, from the segment cache or from the columns.
  FoldStatistics fold(const std::vector<Range>& ranges, bool keep_states) const {
    auto out = FoldStatistics::zeros(global_.n_r(), global_.n_y());
    if (cache_segments_) {
      for (const Range& r : ranges) {
        const auto first = segment_index(r.begin);
        const auto last = segment_index(r.end);
        for (std::size_t j = first; j < last; ++j) {
          out.g_i += segment_stats_[j].g;
          out.p_i += segment_stats_[j].p;
          out.count += segment_stats_[j].count;
        }
      }
      if (keep_states) out.x_i = states(ranges);
      return out;
    }
    MatrixXd x = states(ranges);
    accumulate(out, x, targets(ranges));
    if (keep_states) out.x_i = std::move(x);
    return out;
  }

 private:
  Range segment(std::size_t j) const { return {boundaries_[j], boundaries_[j + 1]}; }

  std::size_t segment_index(Index boundary) const {
    return static_cast<std::size_t>(std::lower_bound(boundaries_.begin(), boundaries_.end(), boundary) -
                                    boundaries_.begin());
  }

  void add_segment(std::size_t j, const MatrixXd& x) {
    if (!collect_stats_) return;
    const MatrixXd y = targets({segment(j)});
    if (cache_segments_) {
      auto s = SufficientStatistics::zeros(global_.n_r(), global_.n_y());
      accumulate(s, x, y);
      global_.g += s.g;
      global_.p += s.p;
      global_.count += s.count;
      segment_stats_.push_back(std::move(s));
    } else {
      accumulate(global_, x, y);
    }
  }

  MatrixXd aggregate_all(const std::vector<MatrixXd>& sequences) const {
    MatrixXd out(config_.n_r(), static_cast<Index>(sequences.size()));
    for (std::size_t j = 0; j < sequences.size(); ++j) {
      out.col(static_cast<Index>(j)) = aggregate_sequence(weights_, config_, sequences[j], data_.aggregate);
    }
    return out;
  }

  const TaskData& data_;
  const ReservoirConfig& config_;
  const ReservoirWeights& weights_;
  Range usable_;
  std::vector<Index> boundaries_;
  std::vector<VectorXd> states_;  // state before each boundary (time series only)
  std::optional<MatrixXd> x_;
  MatrixXd y_;
  bool collect_stats_ = true;
  bool cache_segments_ = false;
  std::vector<SufficientStatistics> segment_stats_;
  SufficientStatistics global_;
};

/// Scores one split's validation window for any readout of the split.
class WindowScorer {
 public:
  WindowScorer(const TaskData& data, const ReservoirConfig& config, const ReservoirWeights& weights,
               const Split& split, double divergence_factor, MatrixXd val_states, MatrixXd val_targets,
               VectorXd warm_state)
      : data_(data), config_(config), weights_(weights), split_(split), divergence_factor_(divergence_factor),
        val_states_(std::move(val_states)), val_targets_(std::move(val_targets)), warm_state_(std::move(warm_state)) {}

  void score(const Readout& readout, SplitResult& into, double& score, bool& divergent) const {
    divergent = false;
    switch (data_.kind) {
      case TaskKind::generative: {
        const Range v = split_.val_range;
        const auto g = score_generative(readout, weights_, config_, warm_state_,
                                        data_.inputs.middleCols(v.begin, v.size()), val_targets_, v.size(),
                                        divergence_factor_);
        score = g.nrmse;
        divergent = g.divergent;
        break;
      }
      case TaskKind::output:
        score = nrmse(readout.w_out * val_states_, val_targets_);
        break;
      case TaskKind::classification: {
        const MatrixXd pred = readout.w_out * val_states_;
        score = nrmse(pred, val_targets_, NrmseNorm::pooled);
        Index wrong = 0;
        for (Index c = 0; c < pred.cols(); ++c) {
          Index guess = 0, truth = 0;
          pred.col(c).maxCoeff(&guess);
          val_targets_.col(c).maxCoeff(&truth);
          wrong += guess != truth;
        }
        into.val_misclassifications = wrong;
        break;
      }
    }
    score = sanitize(score);
  }

 private:
  const TaskData& data_;
  const ReservoirConfig& config_;
  const ReservoirWeights& weights_;
  const Split& split_;
  double divergence_factor_;
  MatrixXd val_states_;
  MatrixXd val_targets_;
  VectorXd warm_state_;
};

/// Runs the beta sweep for one split given a solver for each beta.
template <class Solve>
SplitResult sweep_betas(Index index, const std::vector<double>& betas, const WindowScorer& scorer,
                        const EvalOptions& options, std::map<std::string, double>& timings, Solve&& solve) {
  SplitResult result;
  result.split_index = index;
  result.beta_scores.assign(betas.size(), kInf);
  if (options.keep_beta_readouts) result.beta_readouts.resize(betas.size());
  std::vector<bool> divergent(betas.size(), false);
  std::vector<std::optional<Readout>> readouts(betas.size());
  std::vector<std::optional<Index>> wrong(betas.size());

  for (std::size_t b = 0; b < betas.size(); ++b) {
    std::optional<Readout> r;
    {
      PhaseTimer t(timings, "solve");
      try {
        r = solve(b);
      } catch (const numerical_error&) {
        result.flagged = true;
      }
    }
    if (!r) continue;
    PhaseTimer t(timings, "validation");
    bool div = false;
    scorer.score(*r, result, result.beta_scores[b], div);
    divergent[b] = div;
    wrong[b] = result.val_misclassifications;
    readouts[b] = std::move(r);
  }

  std::optional<std::size_t> best;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    if (!readouts[b]) continue;
    if (!best || result.beta_scores[b] < result.beta_scores[*best] ||
        (result.beta_scores[b] == result.beta_scores[*best] && betas[b] > betas[*best])) {
      best = b;
    }
  }
  if (!best) {
    result.val_score = kInf;
    result.best_beta = betas.empty() ? 0.0 : betas.front();
    result.val_misclassifications.reset();
    return result;
  }
  result.val_score = result.beta_scores[*best];
  result.best_beta = betas[*best];
  result.divergent = divergent[*best];
  result.val_misclassifications = wrong[*best];
  result.ill_conditioned = readouts[*best]->ill_conditioned;
  result.readout = readouts[*best];
  if (options.keep_beta_readouts) result.beta_readouts = std::move(readouts);
  return result;
}

CrossValidation cross_validate_naive(const TaskData& data, const SplitPlan& plan, const ReservoirConfig& config,
                                     const ReservoirWeights& weights, const std::vector<double>& betas,
                                     const EvalOptions& options) {
  CrossValidation cv;
  cv.betas = betas;
  auto& timings = cv.timings_ms;
  const Range usable{plan.washout, plan.trainval_len};
  EvalOptions fresh = options;
  fresh.memory = EvalOptions::Memory::retain_states;
  fresh.segment_cache_bytes = 0;

  for (std::size_t s = 0; s < plan.splits.size(); ++s) {
    const Split& split = plan.splits[s];
    // A straightforward implementation: run the reservoir over everything again
    // and collect fresh statistics from this split's training columns only.
    SplitPlan single{{split}, plan.trainval_len, plan.washout};
    ColumnSource source(data, single, config, weights, fresh, timings, /*collect_stats=*/false);
    SufficientStatistics stats;
    {
      PhaseTimer t(timings, "statistics");
      std::vector<MatrixXd> xs, ys;
      for (const Range& r : split.train_segments) {
        xs.push_back(source.states({r}));
        ys.push_back(source.targets({r}));
      }
      stats = SufficientStatistics::zeros(config.n_r(), data.n_y());
      for (std::size_t b = 0; b < xs.size(); ++b) accumulate(stats, xs[b], ys[b]);
    }
    const std::vector<Range> val{split.val_range};
    WindowScorer scorer(data, config, weights, split, options.divergence_factor, source.states(val),
                        source.targets(val),
                        data.kind == TaskKind::generative ? source.state_before(split.val_range.begin) : VectorXd{});
    cv.splits.push_back(sweep_betas(static_cast<Index>(s), betas, scorer, options, timings, [&](std::size_t b) {
      return ridge_readout(stats, betas[b], options.bias);
    }));
    if (s + 1 == plan.splits.size()) {
      PhaseTimer t(timings, "statistics");
      cv.trainval_stats = SufficientStatistics::zeros(config.n_r(), data.n_y());
      accumulate(cv.trainval_stats, source.states({usable}), source.targets({usable}));
    }
  }
  return cv;
}

}  // namespace

Index TaskData::n_u() const {
  if (kind == TaskKind::classification) return train_sequences.empty() ? 0 : train_sequences.front().rows();
  return inputs.rows();
}

Index TaskData::n_y() const { return kind == TaskKind::classification ? n_classes : targets.rows(); }

Index TaskData::trainval_len() const {
  if (kind == TaskKind::classification) return static_cast<Index>(train_sequences.size());
  return test_range.begin;
}

TaskData make_generative_task(const MatrixXd& series, Index test_len) {
  if (series.cols() < 3) throw contract_error("make_generative_task: series too short");
  if (test_len < 1 || test_len >= series.cols() - 1) {
    throw contract_error("make_generative_task: test_len must be in [1, T - 1)");
  }
  TaskData t;
  t.kind = TaskKind::generative;
  t.inputs = series.leftCols(series.cols() - 1);
  t.targets = series.rightCols(series.cols() - 1);
  t.test_range = {t.targets.cols() - test_len, t.targets.cols()};
  return t;
}

TaskData make_output_task(const MatrixXd& inputs, const MatrixXd& targets, Index test_len) {
  if (inputs.cols() != targets.cols()) throw contract_error("make_output_task: inputs and targets differ in length");
  if (test_len < 1 || test_len >= inputs.cols()) throw contract_error("make_output_task: test_len out of range");
  TaskData t;
  t.kind = TaskKind::output;
  t.inputs = inputs;
  t.targets = targets;
  t.test_range = {inputs.cols() - test_len, inputs.cols()};
  return t;
}

TaskData make_classification_task(std::vector<MatrixXd> train_sequences, std::vector<int> train_labels,
                                  std::vector<MatrixXd> test_sequences, std::vector<int> test_labels,
                                  int n_classes, AggregateMode mode) {
  if (train_sequences.size() != train_labels.size() || test_sequences.size() != test_labels.size()) {
    throw contract_error("make_classification_task: sequence and label counts differ");
  }
  TaskData t;
  t.kind = TaskKind::classification;
  t.train_sequences = std::move(train_sequences);
  t.train_labels = std::move(train_labels);
  t.test_sequences = std::move(test_sequences);
  t.test_labels = std::move(test_labels);
  t.n_classes = n_classes;
  t.aggregate = mode;
  return t;
}

double nrmse(const MatrixXd& pred, const MatrixXd& target, NrmseNorm norm) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw contract_error("nrmse: prediction and target shapes differ");
  }
  if (target.cols() < 2) throw contract_error("nrmse: need at least two time steps");
  if (norm == NrmseNorm::pooled) {
    const double mean = target.mean();
    const double var = (target.array() - mean).square().mean();
    if (!(var > 0.0)) throw contract_error("nrmse: target is constant");
    return std::sqrt((pred - target).array().square().mean() / var);
  }
  double ratio_sum = 0.0;
  for (Index d = 0; d < target.rows(); ++d) {
    const double mean = target.row(d).mean();
    const double var = (target.row(d).array() - mean).square().mean();
    if (!(var > 0.0)) throw contract_error("nrmse: target dimension " + std::to_string(d) + " is constant");
    ratio_sum += (pred.row(d) - target.row(d)).array().square().mean() / var;
  }
  return std::sqrt(ratio_sum / static_cast<double>(target.rows()));
}

GenerativeScore score_generative(const Readout& readout, const ReservoirWeights& weights,
                                 const ReservoirConfig& config, const VectorXd& warm_state,
                                 const MatrixXd& val_inputs, const MatrixXd& val_targets, Index horizon,
                                 double divergence_factor) {
  if (horizon < 1 || val_targets.cols() < horizon || val_inputs.cols() < 1) {
    throw contract_error("score_generative: horizon exceeds the validation window");
  }
  const Index n_y = readout.w_out.rows();
  if (n_y != config.n_u) throw contract_error("score_generative: output must feed back as input (n_y == n_u)");
  const MatrixXd targets = val_targets.leftCols(horizon);
  const double limit = divergence_factor * std::max(targets.cwiseAbs().maxCoeff(), 1e-300);

  GenerativeScore out;
  MatrixXd pred(n_y, horizon);
  VectorXd x = warm_state;
  VectorXd u = val_inputs.col(0);
  VectorXd ext(config.n_r());
  for (Index n = 0; n < horizon; ++n) {
    advance_state(weights, config, x, u);
    write_extended(u, x, ext);
    u.noalias() = readout.w_out * ext;
    pred.col(n) = u;
    if (!u.allFinite()) {
      out.divergent = true;
      out.nrmse = kInf;
      return out;
    }
    if (u.cwiseAbs().maxCoeff() > limit) out.divergent = true;
  }
  if (horizon == 1) {
    // a single step has no variance to normalize by; fall back to the window's own
    const double err = (pred - targets).squaredNorm() / static_cast<double>(n_y);
    out.nrmse = std::sqrt(err);
    return out;
  }
  // exact reproduction scores 0 even on a constant window, where NRMSE has no scale
  out.nrmse = pred == targets ? 0.0 : sanitize(nrmse(pred, targets));
  return out;
}

double score_output(const Readout& readout, const MatrixXd& x_ext_block, const MatrixXd& targets) {
  if (readout.w_out.cols() != x_ext_block.rows()) throw contract_error("score_output: readout width != state size");
  return nrmse(readout.w_out * x_ext_block, targets);
}

MatrixXd one_hot(const std::vector<int>& labels, int n_classes) {
  MatrixXd y = MatrixXd::Zero(n_classes, static_cast<Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 1 || labels[j] > n_classes) {
      throw contract_error("label " + std::to_string(labels[j]) + " outside [1, " + std::to_string(n_classes) + "]");
    }
    y(labels[j] - 1, static_cast<Index>(j)) = 1.0;
  }
  return y;
}

ClassificationScore score_classification(const Readout& readout, const MatrixXd& aggregated_states,
                                         const std::vector<int>& labels, int n_classes) {
  if (aggregated_states.cols() != static_cast<Index>(labels.size())) {
    throw contract_error("score_classification: one label per state column required");
  }
  const MatrixXd target = one_hot(labels, n_classes);
  const MatrixXd pred = readout.w_out * aggregated_states;
  ClassificationScore out;
  out.nrmse = nrmse(pred, target, NrmseNorm::pooled);
  for (Index c = 0; c < pred.cols(); ++c) {
    Index guess = 0;
    pred.col(c).maxCoeff(&guess);  // first maximal index wins
    out.misclassifications += guess + 1 != labels[static_cast<std::size_t>(c)];
  }
  return out;
}

CrossValidation cross_validate(const TaskData& data, const SplitPlan& plan, const ReservoirConfig& config,
                               const ReservoirWeights& weights, const std::vector<double>& betas,
                               Backend backend, const EvalOptions& options) {
  if (betas.empty()) throw contract_error("cross_validate: empty beta grid");
  if (plan.trainval_len != data.trainval_len()) {
    throw contract_error("cross_validate: plan covers " + std::to_string(plan.trainval_len) +
                         " indices but the task has " + std::to_string(data.trainval_len()));
  }
  if (const auto issues = validate_plan(plan); !issues.empty()) {
    throw contract_error("cross_validate: invalid plan: " + issues.front());
  }
  if (backend == Backend::naive) return cross_validate_naive(data, plan, config, weights, betas, options);

  CrossValidation cv;
  cv.betas = betas;
  auto& timings = cv.timings_ms;
  ColumnSource source(data, plan, config, weights, options, timings);
  SufficientStatistics global = source.global();

  // One cached inverse per beta for the Woodbury backend.
  std::vector<std::optional<SufficientStatistics>> inverses(betas.size());
  if (backend == Backend::large_k) {
    PhaseTimer t(timings, "solve");
    for (std::size_t b = 0; b < betas.size(); ++b) {
      SufficientStatistics s = global;
      try {
        cache_inverse(s, betas[b], options.bias);
        inverses[b] = std::move(s);
      } catch (const numerical_error&) {
      }
    }
  }

  const Index n_r = config.n_r();
  for (std::size_t s = 0; s < plan.splits.size(); ++s) {
    const Split& split = plan.splits[s];
    const std::vector<Range> excluded = excluded_ranges(split, source.usable());
    const bool woodbury = backend == Backend::large_k && total_size(excluded) < n_r;
    FoldStatistics fold;
    {
      PhaseTimer t(timings, "statistics");
      fold = source.fold(excluded, woodbury);
    }
    MatrixXd val_states;
    if (data.kind != TaskKind::generative) {
      PhaseTimer t(timings, data.kind == TaskKind::classification ? "validation" : "reservoir");
      val_states = source.states({split.val_range});
    }
    WindowScorer scorer(data, config, weights, split, options.divergence_factor, std::move(val_states),
                        source.targets({split.val_range}),
                        data.kind == TaskKind::generative ? source.state_before(split.val_range.begin) : VectorXd{});
    cv.splits.push_back(sweep_betas(static_cast<Index>(s), betas, scorer, options, timings, [&](std::size_t b) {
      if (woodbury && inverses[b]) {
        try {
          return split_readout_woodbury(*inverses[b], fold, betas[b]);
        } catch (const numerical_error&) {
        }
      }
      if (backend == Backend::large_k) ++cv.woodbury_fallbacks;
      return split_readout_subtract(global, fold, betas[b], options.bias);
    }));
  }
  cv.trainval_stats = std::move(global);
  return cv;
}

double beta_best_on_average(const std::vector<SplitResult>& results, const std::vector<double>& betas) {
  if (results.empty() || betas.empty()) throw contract_error("beta_best_on_average: nothing to average");
  std::size_t best = 0;
  double best_mean = kInf;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    double sum = 0.0;
    for (const SplitResult& r : results) sum += r.beta_scores.at(b);
    const double mean = sanitize(sum / static_cast<double>(results.size()));
    if (b == 0 || mean < best_mean || (mean == best_mean && betas[b] > betas[best])) {
      best = b;
      best_mean = mean;
    }
  }
  return betas[best];
}

namespace {

std::vector<const SplitResult*> usable_results(const std::vector<SplitResult>& results) {
  if (results.empty()) throw contract_error("finalize: no split results");
  std::vector<const SplitResult*> out;
  bool any_stable = false;
  for (const SplitResult& r : results) {
    if (!r.readout) continue;
    out.push_back(&r);
    any_stable = any_stable || !r.divergent;
  }
  if (out.empty() || !any_stable) throw error("finalize: every split failed or diverged");
  return out;
}

Readout average_readouts(const std::vector<const SplitResult*>& results) {
  Readout out;
  out.w_out = MatrixXd::Zero(results.front()->readout->w_out.rows(), results.front()->readout->w_out.cols());
  double beta_sum = 0.0;
  for (const SplitResult* r : results) {
    out.w_out += r->readout->w_out;
    beta_sum += r->best_beta;
    out.ill_conditioned = out.ill_conditioned || r->readout->ill_conditioned;
  }
  const double n = static_cast<double>(results.size());
  out.w_out /= n;
  out.beta = beta_sum / n;
  return out;
}

}  // namespace

Readout finalize(const std::vector<SplitResult>& results, FinalMethod method,
                 const SufficientStatistics& global_stats, const std::vector<double>& betas,
                 BiasPolicy policy) {
  const auto usable = usable_results(results);
  switch (method) {
    case FinalMethod::averaged:
      return average_readouts(usable);
    case FinalMethod::best: {
      const SplitResult* best = usable.front();
      for (const SplitResult* r : usable) {
        if (r->val_score < best->val_score) best = r;
      }
      return *best->readout;
    }
    case FinalMethod::retrained:
      return ridge_readout(global_stats, beta_best_on_average(results, betas), policy);
    case FinalMethod::ireg_retrained:
      return ireg_finalize(results, IregMode::retrained, global_stats, policy);
  }
  throw contract_error("finalize: unknown method");
}

Readout ireg_finalize(const std::vector<SplitResult>& results, IregMode mode,
                      const SufficientStatistics& global_stats, BiasPolicy policy) {
  const auto usable = usable_results(results);
  if (mode == IregMode::averaged) return average_readouts(usable);
  double beta_sum = 0.0;
  for (const SplitResult* r : usable) beta_sum += r->best_beta;
  return ridge_readout(global_stats, beta_sum / static_cast<double>(usable.size()), policy);
}

TestHarness::TestHarness(const TaskData& data, const ReservoirConfig& config, const ReservoirWeights& weights,
                         double divergence_factor)
    : data_(&data), config_(&config), weights_(&weights), divergence_factor_(divergence_factor) {
  if (data.kind == TaskKind::classification) {
    test_states_.resize(config.n_r(), static_cast<Index>(data.test_sequences.size()));
    for (std::size_t j = 0; j < data.test_sequences.size(); ++j) {
      test_states_.col(static_cast<Index>(j)) =
          aggregate_sequence(weights, config, data.test_sequences[j], data.aggregate);
    }
    return;
  }
  const Index warm_len = data.test_range.begin;
  warm_state_ = harvest(weights, config, data.inputs.leftCols(warm_len), VectorXd::Zero(config.n_x), 0).x_final;
  if (data.kind == TaskKind::output) {
    test_states_ = harvest(weights, config, data.inputs.middleCols(warm_len, data.test_range.size()), warm_state_, 0)
                       .x_ext;
  }
}

TestScore TestHarness::score(const Readout& readout) const {
  TestScore out;
  const Range test = data_->test_range;
  switch (data_->kind) {
    case TaskKind::generative: {
      const auto g = score_generative(readout, *weights_, *config_, warm_state_,
                                      data_->inputs.middleCols(test.begin, test.size()),
                                      data_->targets.middleCols(test.begin, test.size()), test.size(),
                                      divergence_factor_);
      out.nrmse = g.nrmse;
      out.divergent = g.divergent;
      break;
    }
    case TaskKind::output:
      out.nrmse = score_output(readout, test_states_, data_->targets.middleCols(test.begin, test.size()));
      break;
    case TaskKind::classification: {
      const auto c = score_classification(readout, test_states_, data_->test_labels, data_->n_classes);
      out.nrmse = c.nrmse;
      out.misclassifications = c.misclassifications;
      break;
    }
  }
  out.nrmse = sanitize(out.nrmse);
  return out;
}

EvaluationReport evaluate(const TaskData& data, const SplitPlan& plan, const ReservoirConfig& config,
                          const ReservoirWeights& weights, const std::vector<double>& betas, Backend backend,
                          const EvalOptions& options) {
  CrossValidation cv = cross_validate(data, plan, config, weights, betas, backend, options);
  EvaluationReport report;
  report.timings_ms = cv.timings_ms;
  report.woodbury_fallbacks = cv.woodbury_fallbacks;
  double sum = 0.0;
  for (const SplitResult& r : cv.splits) {
    sum += r.val_score;
    report.any_divergent = report.any_divergent || r.divergent;
  }
  report.mean_val = sanitize(sum / static_cast<double>(cv.splits.size()));
  report.retrain_beta = beta_best_on_average(cv.splits, betas);

  std::map<std::string, double> test_timing;
  {
    PhaseTimer t(test_timing, "test");
    try {
      for (FinalMethod m : {FinalMethod::averaged, FinalMethod::best, FinalMethod::retrained,
                            FinalMethod::ireg_retrained}) {
        try {
          report.final_models.emplace(m, finalize(cv.splits, m, cv.trainval_stats, betas, options.bias));
        } catch (const numerical_error&) {
        }
      }
    } catch (const error&) {
      // every split failed: no final models, the report keeps the per-split record
    }
    if (const auto it = report.final_models.find(FinalMethod::ireg_retrained); it != report.final_models.end()) {
      report.ireg_beta = it->second.beta;
    }
    if (!report.final_models.empty()) {
      const TestHarness harness(data, config, weights, options.divergence_factor);
      for (const auto& [method, readout] : report.final_models) report.test_scores[method] = harness.score(readout);
    }
  }
  report.timings_ms["test"] = test_timing["test"];
  report.per_split = std::move(cv.splits);
  return report;
}

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::generative: return "generative";
    case TaskKind::output: return "output";
    case TaskKind::classification: return "classification";
  }
  return "?";
}

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::naive: return "naive";
    case Backend::small_k: return "small_k";
    case Backend::large_k: return "large_k";
  }
  return "?";
}

std::string_view to_string(FinalMethod m) {
  switch (m) {
    case FinalMethod::averaged: return "averaged";
    case FinalMethod::best: return "best";
    case FinalMethod::retrained: return "retrained";
    case FinalMethod::ireg_retrained: return "ireg_retrained";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "generative") return TaskKind::generative;
  if (s == "output") return TaskKind::output;
  if (s == "classification") return TaskKind::classification;
  throw config_error("unknown task kind '" + std::string(s) + "'");
}

Backend parse_backend(std::string_view s) {
  if (s == "naive") return Backend::naive;
  if (s == "small_k") return Backend::small_k;
  if (s == "large_k") return Backend::large_k;
  throw config_error("unknown backend '" + std::string(s) + "' (expected naive, small_k or large_k)");
}

FinalMethod parse_final_method(std::string_view s) {
  if (s == "averaged") return FinalMethod::averaged;
  if (s == "best") return FinalMethod::best;
  if (s == "retrained") return FinalMethod::retrained;
  if (s == "ireg_retrained") return FinalMethod::ireg_retrained;
  throw config_error("unknown final method '" + std::string(s) + "'");
}

}  // namespace esncv
