#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

namespace esncv {

using Eigen::Index;
using Eigen::MatrixXd;

/// Which diagonal entries the ridge penalty touches. Extended states carry the
/// constant bias in row 0, which is normally left unregularized.
enum class BiasPolicy { exclude_first, regularize_all };

/// Explicit (G + beta I_mod)^-1 kept for the Woodbury backend.
struct CachedInverse {
  MatrixXd inverse;
  double beta = 0.0;
  BiasPolicy policy = BiasPolicy::exclude_first;
  double condition = 1.0;
};

/// Accumulators G = X X^T and P = Y X^T.
struct SufficientStatistics {
  MatrixXd g;
  MatrixXd p;
  Index count = 0;
  std::optional<CachedInverse> a_inv;

  static SufficientStatistics zeros(Index n_r, Index n_y);
  Index n_r() const { return g.rows(); }
  Index n_y() const { return p.rows(); }
};

/// Statistics of the columns left out of one split's training set.
struct FoldStatistics {
  MatrixXd g_i;
  MatrixXd p_i;
  std::optional<MatrixXd> x_i;  // the excluded extended states, when retained
  Index count = 0;

  static FoldStatistics zeros(Index n_r, Index n_y);
};

struct Readout {
  MatrixXd w_out;  // n_y x n_r
  double beta = 0.0;
  bool ill_conditioned = false;  // beta == 0 and condition estimate above 1e12
  double condition = 1.0;
};

/// Condition estimate above which an unregularized solve is flagged in reports.
inline constexpr double kFlagCondition = 1e12;

/// g += X X^T, p += Y X^T, count += cols. Drops any cached inverse.
void accumulate(SufficientStatistics& stats, const MatrixXd& x_block, const MatrixXd& y_block);
void accumulate(FoldStatistics& fold, const MatrixXd& x_block, const MatrixXd& y_block);

/// w_out = p (g + beta I_mod)^-1 via a symmetric factorization.
/// Throws numerical_error when the system is singular to working precision.
Readout ridge_readout(const SufficientStatistics& stats, double beta,
                      BiasPolicy policy = BiasPolicy::exclude_first);

/// Oracle backend: fresh statistics from the training blocks only, then ridge_readout.
Readout split_readout_naive(std::span<const MatrixXd> x_train_blocks,
                            std::span<const MatrixXd> y_train_blocks, double beta,
                            BiasPolicy policy = BiasPolicy::exclude_first);

/// Fold-subtraction backend: w_out = (p - p_i)(g - g_i + beta I_mod)^-1.
Readout split_readout_subtract(const SufficientStatistics& global, const FoldStatistics& fold,
                               double beta, BiasPolicy policy = BiasPolicy::exclude_first);

/// Caches (g + beta I_mod)^-1 on `stats` for the Woodbury backend.
void cache_inverse(SufficientStatistics& stats, double beta,
                   BiasPolicy policy = BiasPolicy::exclude_first);

/// (A - X X^T)^-1 from A^-1 via the Woodbury identity.
MatrixXd woodbury_inverse(const MatrixXd& a_inv, const MatrixXd& x);

/// Woodbury backend. Requires a cached inverse for `beta` and retained fold states.
/// Throws numerical_error when I - X_i^T A^-1 X_i is singular (the fold carries
/// too much of the data for this beta; callers fall back to subtraction).
Readout split_readout_woodbury(const SufficientStatistics& global, const FoldStatistics& fold,
                               double beta);

}  // namespace esncv
