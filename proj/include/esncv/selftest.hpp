#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esncv/evaluation.hpp"

namespace esncv {

struct EquivalenceSpec {
  Index T = 300;  // trainval length
  Index n_r = 20;
  std::vector<Index> folds = {2, 5, 50, 300};
  std::vector<double> betas = {0.0, 1e-6, 1e-2};
  std::uint64_t seed = 0;
  /// Flips the sign of the fold subtraction in the kernel-level checks.
  /// Used to confirm the suite actually detects a broken backend.
  bool sabotage = false;
};

struct EquivalenceCase {
  std::string level;  // "cross_validate" or "kernel"
  Backend backend = Backend::small_k;
  Index k = 0;
  double beta = 0.0;
  double max_rel_error = 0.0;  // over all splits, relative Frobenius norm against naive
  double tolerance = 0.0;
  bool pass = false;
};

struct EquivalenceResult {
  std::vector<EquivalenceCase> cases;
  double max_rel_error = 0.0;
  double seconds = 0.0;
  bool pass = false;
};

/// Tolerance on the relative readout deviation from the naive oracle.
double equivalence_tolerance(double beta);

/// Compares small_k and large_k readouts with the naive backend on a random
/// generative task, both through cross_validate and directly on the readout kernels.
EquivalenceResult backend_equivalence(const EquivalenceSpec& spec = {});

}  // namespace esncv
