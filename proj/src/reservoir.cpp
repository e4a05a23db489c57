#include "esncv/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "esncv/errors.hpp"

namespace esncv {

double ReservoirConfig::density() const {
  if (w_density) return *w_density;
  return std::min(1.0, 10.0 / static_cast<double>(n_x));
}

void ReservoirConfig::validate() const {
  if (n_x < 1) throw config_error("reservoir size n_x must be >= 1");
  if (n_u < 1) throw config_error("input dimension n_u must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw config_error("leaking rate alpha must lie in (0, 1]");
  if (!(rho > 0.0)) throw config_error("spectral radius rho must be > 0");
  const double d = density();
  if (!(d > 0.0 && d <= 1.0)) throw config_error("w_density must lie in (0, 1]");
  if (!std::isfinite(input_scale)) throw config_error("input_scale must be finite");
}

double spectral_radius(const SparseMatrix& w) {
  if (w.rows() != w.cols()) throw contract_error("spectral_radius: matrix is not square");
  if (w.rows() == 0) return 0.0;
  const MatrixXd dense = MatrixXd(w);
  Eigen::EigenSolver<MatrixXd> solver(dense, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw numerical_error("spectral_radius: eigenvalue iteration did not converge", 0.0);
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

ReservoirWeights generate_weights(const ReservoirConfig& config) {
  config.validate();
  const Index n_x = config.n_x;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  ReservoirWeights out;
  out.w_in.resize(n_x, 1 + config.n_u);
  for (Index j = 0; j < out.w_in.cols(); ++j) {
    for (Index i = 0; i < n_x; ++i) out.w_in(i, j) = config.input_scale * unit(rng);
  }

  const auto cells = static_cast<std::size_t>(n_x * n_x);
  const auto nnz = std::min(
      cells, static_cast<std::size_t>(std::ceil(config.density() * static_cast<double>(cells) - 1e-9)));
  std::vector<std::size_t> all(cells);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(nnz);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), nnz, rng);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(nnz);
  for (std::size_t cell : picked) {
    triplets.emplace_back(static_cast<Index>(cell / n_x), static_cast<Index>(cell % n_x), unit(rng));
  }
  out.w.resize(n_x, n_x);
  out.w.setFromTriplets(triplets.begin(), triplets.end());

  const double raw_radius = spectral_radius(out.w);
  if (!(raw_radius > 1e-12)) {
    throw numerical_error("generate_weights: degenerate sparse draw with zero spectral radius (seed " +
                              std::to_string(config.seed) + ")",
                          raw_radius);
  }
  out.w *= config.rho / raw_radius;
  return out;
}

void write_extended(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& x,
                    Eigen::Ref<VectorXd> out) {
  out(0) = 1.0;
  out.segment(1, u.size()) = u;
  out.tail(x.size()) = x;
}

void advance_state(const ReservoirWeights& weights, const ReservoirConfig& config,
                   Eigen::Ref<VectorXd> x, const Eigen::Ref<const VectorXd>& u) {
  VectorXd pre = weights.w * x;
  pre += weights.w_in.col(0);
  pre.noalias() += weights.w_in.rightCols(u.size()) * u;
  x = (1.0 - config.alpha) * x + config.alpha * pre.array().tanh().matrix();
}

VectorXd update_state(const ReservoirWeights& weights, const ReservoirConfig& config,
                      const VectorXd& x, const VectorXd& u) {
  if (x.size() != config.n_x || u.size() != config.n_u ||
      weights.w.rows() != config.n_x || weights.w_in.cols() != 1 + config.n_u) {
    throw contract_error("update_state: dimension mismatch between state, input and weights");
  }
  VectorXd next = x;
  advance_state(weights, config, next, u);
  return next;
}

StateHarvest harvest(const ReservoirWeights& weights, const ReservoirConfig& config,
                     const MatrixXd& inputs, const VectorXd& x0, Index washout) {
  const Index length = inputs.cols();
  if (washout < 0 || washout >= length) {
    throw config_error("harvest: washout (" + std::to_string(washout) +
                       ") must be smaller than the sequence length (" + std::to_string(length) + ")");
  }
  if (inputs.rows() != config.n_u || x0.size() != config.n_x) {
    throw contract_error("harvest: input rows or initial state size do not match the config");
  }
  StateHarvest out;
  out.x_ext.resize(config.n_r(), length - washout);
  VectorXd x = x0;
  for (Index n = 0; n < length; ++n) {
    advance_state(weights, config, x, inputs.col(n));
    if (n >= washout) write_extended(inputs.col(n), x, out.x_ext.col(n - washout));
  }
  out.x_final = std::move(x);
  return out;
}

VectorXd aggregate_sequence(const ReservoirWeights& weights, const ReservoirConfig& config,
                            const MatrixXd& sequence, AggregateMode mode) {
  if (sequence.cols() < 1) throw contract_error("aggregate_sequence: empty sequence");
  const StateHarvest h = harvest(weights, config, sequence, VectorXd::Zero(config.n_x), 0);
  if (mode == AggregateMode::last_state) return h.x_ext.col(h.x_ext.cols() - 1);
  return h.x_ext.rowwise().mean();
}

}  // namespace esncv
