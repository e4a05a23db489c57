#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace esncv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Hyper-parameters of a leaky-integrator tanh reservoir.
struct ReservoirConfig {
  Index n_x = 50;
  Index n_u = 1;
  double alpha = 1.0;       // leaking rate, (0, 1]
  double rho = 1.0;         // target spectral radius of W
  std::optional<double> w_density;  // fraction of nonzeros in W; default min(1, 10 / n_x)
  double input_scale = 1.0;
  std::uint64_t seed = 0;

  Index n_r() const { return 1 + n_u + n_x; }
  double density() const;

  /// Throws config_error naming the first violated invariant.
  void validate() const;
};

struct ReservoirWeights {
  MatrixXd w_in;  // n_x x (1 + n_u)
  SparseMatrix w; // n_x x n_x
};

/// Extended states [1; u(n); x(n)] collected column-wise, plus the state after the last step.
struct StateHarvest {
  MatrixXd x_ext;
  VectorXd x_final;
};

enum class AggregateMode { last_state, mean_state };

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const SparseMatrix& w);

/// Draws W_in uniformly in [-input_scale, input_scale] and a sparse W with
/// ceil(density * n_x^2) nonzeros uniform in [-1, 1], rescaled to spectral radius rho.
/// Throws numerical_error when the raw draw has (numerically) zero spectral radius.
ReservoirWeights generate_weights(const ReservoirConfig& config);

/// One step of x <- (1 - alpha) x + alpha tanh(W_in [1; u] + W x).
VectorXd update_state(const ReservoirWeights& weights, const ReservoirConfig& config,
                      const VectorXd& x, const VectorXd& u);

/// In-place variant of update_state used by the hot loops. `u` must have n_u entries.
void advance_state(const ReservoirWeights& weights, const ReservoirConfig& config,
                   Eigen::Ref<VectorXd> x, const Eigen::Ref<const VectorXd>& u);

/// Writes [1; u; x] into `out` (length n_r).
void write_extended(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& x,
                    Eigen::Ref<VectorXd> out);

/// Runs the reservoir over all columns of `inputs` starting from `x0`. The first
/// `washout` extended states are not stored but the state still advances through them.
StateHarvest harvest(const ReservoirWeights& weights, const ReservoirConfig& config,
                     const MatrixXd& inputs, const VectorXd& x0, Index washout);

/// Runs one sequence from the zero state and reduces it to a single extended state.
VectorXd aggregate_sequence(const ReservoirWeights& weights, const ReservoirConfig& config,
                            const MatrixXd& sequence, AggregateMode mode);

}  // namespace esncv
