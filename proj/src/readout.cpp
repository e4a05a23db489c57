#include "esncv/readout.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

// Systems closer to singular than this are rejected rather than flagged.
constexpr double kRejectCondition = 1.0 / std::numeric_limits<double>::epsilon();

void add_penalty(MatrixXd& m, double beta, BiasPolicy policy) {
  const Index first = policy == BiasPolicy::exclude_first ? 1 : 0;
  for (Index i = first; i < m.rows(); ++i) m(i, i) += beta;
}

void symmetric_rank_update(MatrixXd& g, const MatrixXd& x) {
  g.selfadjointView<Eigen::Lower>().rankUpdate(x);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
}

void check_block(Index n_r, Index n_y, const MatrixXd& x_block, const MatrixXd& y_block) {
  if (x_block.rows() != n_r || y_block.rows() != n_y || x_block.cols() != y_block.cols()) {
    throw contract_error("accumulate: block is " + std::to_string(x_block.rows()) + "x" +
                         std::to_string(x_block.cols()) + " / " + std::to_string(y_block.rows()) +
                         "x" + std::to_string(y_block.cols()) + ", statistics expect n_r=" +
                         std::to_string(n_r) + ", n_y=" + std::to_string(n_y) +
                         " and equal column counts");
  }
}

Readout solve_normal_equations(MatrixXd system, const MatrixXd& rhs, double beta, BiasPolicy policy) {
  add_penalty(system, beta, policy);
  Eigen::LDLT<MatrixXd> ldlt(system);
  const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(condition < kRejectCondition)) {
    throw numerical_error("ridge solve: system is singular to working precision (beta=" +
                              std::to_string(beta) + ", condition estimate " +
                              std::to_string(condition) + ")",
                          condition);
  }
  Readout out;
  out.w_out = ldlt.solve(rhs.transpose()).transpose();
  if (!out.w_out.allFinite()) {
    throw numerical_error("ridge solve: non-finite readout", condition);
  }
  out.beta = beta;
  out.condition = condition;
  out.ill_conditioned = beta == 0.0 && condition > kFlagCondition;
  return out;
}

}  // namespace

SufficientStatistics SufficientStatistics::zeros(Index n_r, Index n_y) {
  return {MatrixXd::Zero(n_r, n_r), MatrixXd::Zero(n_y, n_r), 0, std::nullopt};
}

FoldStatistics FoldStatistics::zeros(Index n_r, Index n_y) {
  return {MatrixXd::Zero(n_r, n_r), MatrixXd::Zero(n_y, n_r), std::nullopt, 0};
}

void accumulate(SufficientStatistics& stats, const MatrixXd& x_block, const MatrixXd& y_block) {
  check_block(stats.n_r(), stats.n_y(), x_block, y_block);
  stats.a_inv.reset();
  if (x_block.cols() == 0) return;
  symmetric_rank_update(stats.g, x_block);
  stats.p.noalias() += y_block * x_block.transpose();
  stats.count += x_block.cols();
}

void accumulate(FoldStatistics& fold, const MatrixXd& x_block, const MatrixXd& y_block) {
  check_block(fold.g_i.rows(), fold.p_i.rows(), x_block, y_block);
  if (x_block.cols() == 0) return;
  symmetric_rank_update(fold.g_i, x_block);
  fold.p_i.noalias() += y_block * x_block.transpose();
  fold.count += x_block.cols();
}

Readout ridge_readout(const SufficientStatistics& stats, double beta, BiasPolicy policy) {
  if (!(beta >= 0.0)) throw contract_error("ridge_readout: beta must be >= 0");
  return solve_normal_equations(stats.g, stats.p, beta, policy);
}

Readout split_readout_naive(std::span<const MatrixXd> x_train_blocks,
                            std::span<const MatrixXd> y_train_blocks, double beta,
                            BiasPolicy policy) {
  if (x_train_blocks.empty() || x_train_blocks.size() != y_train_blocks.size()) {
    throw contract_error("split_readout_naive: need matching, non-empty block lists");
  }
  auto stats = SufficientStatistics::zeros(x_train_blocks.front().rows(), y_train_blocks.front().rows());
  for (std::size_t b = 0; b < x_train_blocks.size(); ++b) {
    accumulate(stats, x_train_blocks[b], y_train_blocks[b]);
  }
  return ridge_readout(stats, beta, policy);
}

Readout split_readout_subtract(const SufficientStatistics& global, const FoldStatistics& fold,
                               double beta, BiasPolicy policy) {
  if (!(beta >= 0.0)) throw contract_error("split_readout_subtract: beta must be >= 0");
  if (fold.g_i.rows() != global.n_r() || fold.p_i.rows() != global.n_y()) {
    throw contract_error("split_readout_subtract: fold and global statistics differ in shape");
  }
  return solve_normal_equations(global.g - fold.g_i, global.p - fold.p_i, beta, policy);
}

void cache_inverse(SufficientStatistics& stats, double beta, BiasPolicy policy) {
  MatrixXd system = stats.g;
  add_penalty(system, beta, policy);
  Eigen::LDLT<MatrixXd> ldlt(system);
  const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(condition < kRejectCondition)) {
    throw numerical_error("cache_inverse: regularized Gram matrix is singular (beta=" +
                              std::to_string(beta) + ")",
                          condition);
  }
  MatrixXd inverse = ldlt.solve(MatrixXd::Identity(system.rows(), system.cols()));
  inverse = 0.5 * (inverse + inverse.transpose()).eval();
  stats.a_inv = CachedInverse{std::move(inverse), beta, policy, condition};
}

MatrixXd woodbury_inverse(const MatrixXd& a_inv, const MatrixXd& x) {
  if (x.rows() != a_inv.rows()) throw contract_error("woodbury_inverse: row mismatch");
  if (x.cols() == 0) return a_inv;
  const MatrixXd b = a_inv * x;  // A^-1 X, shared by both outer factors
  MatrixXd inner = MatrixXd::Identity(x.cols(), x.cols());
  inner.noalias() -= x.transpose() * b;
  Eigen::LDLT<MatrixXd> ldlt(0.5 * (inner + inner.transpose()));
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1.0 / kRejectCondition)) {
    throw numerical_error("woodbury_inverse: I - X^T A^-1 X is singular", 1.0 / ldlt.rcond());
  }
  MatrixXd out = a_inv;
  out.noalias() += b * ldlt.solve(b.transpose());
  return out;
}

Readout split_readout_woodbury(const SufficientStatistics& global, const FoldStatistics& fold,
                               double beta) {
  if (!global.a_inv || global.a_inv->beta != beta) {
    throw contract_error("split_readout_woodbury: no cached inverse for this beta");
  }
  if (!fold.x_i) throw contract_error("split_readout_woodbury: fold states were not retained");
  const MatrixXd& a_inv = global.a_inv->inverse;
  const MatrixXd& x = *fold.x_i;
  if (x.rows() != a_inv.rows()) throw contract_error("split_readout_woodbury: row mismatch");

  const MatrixXd q = global.p - fold.p_i;
  Readout out;
  out.beta = beta;
  out.condition = global.a_inv->condition;
  out.ill_conditioned = beta == 0.0 && out.condition > kFlagCondition;
  out.w_out.noalias() = q * a_inv;
  if (x.cols() == 0) return out;

  // (A - X X^T)^-1 = A^-1 + B (I - X^T B)^-1 B^T with B = A^-1 X; applied to q
  // from the left so no n_r x n_r temporary beyond A^-1 itself is formed.
  const MatrixXd b = a_inv * x;
  MatrixXd inner = MatrixXd::Identity(x.cols(), x.cols());
  inner.noalias() -= x.transpose() * b;
  Eigen::LDLT<MatrixXd> ldlt(0.5 * (inner + inner.transpose()));
  const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  if (!(rcond > 1.0 / kRejectCondition) || ldlt.vectorD().minCoeff() <= 0.0) {
    throw numerical_error("split_readout_woodbury: I - X_i^T A^-1 X_i is singular; the fold is too "
                          "informative for beta=" + std::to_string(beta),
                          rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
  }
  const MatrixXd qb = q * b;
  out.w_out.noalias() += ldlt.solve(qb.transpose()).transpose() * b.transpose();
  if (!out.w_out.allFinite()) throw numerical_error("split_readout_woodbury: non-finite readout", 1.0 / rcond);
  return out;
}

}  // namespace esncv
