#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "esncv/evaluation.hpp"

namespace esncv {

struct BenchSpec {
  Index T = 1260;
  std::vector<Index> sizes = {50, 500};  // extended reservoir sizes n_r (n_u = n_y = 1)
  std::vector<Index> folds = {2, 5, 10, 21, 63, 126, 252, 630, 1260};
  std::vector<Backend> backends = {Backend::naive, Backend::small_k, Backend::large_k};
  Index repeats = 5;
  std::uint64_t seed = 0;
  std::vector<double> betas = {1e-6};
  double alpha = 0.5;
  double rho = 0.9;

  /// Throws config_error unless repeats >= 1, every k in [2, T] and every size >= 3.
  void validate() const;
};

struct BenchRow {
  Backend backend = Backend::naive;
  Index n_r = 0;
  Index k = 0;
  std::string phase;  // total, reservoir, statistics, solve, validation
  double mean_ms = 0.0;
  double min_ms = 0.0;
};

using BenchTable = std::vector<BenchRow>;

/// Times k-fold CV of a generative task on random data for every
/// (n_r, backend, k) cell. One discarded warm-up run precedes the timed repeats;
/// weight generation and data synthesis are outside the timed region.
BenchTable run_bench(const BenchSpec& spec, const std::function<void(const BenchRow&)>& progress = {});

struct ScalingVerdict {
  enum class Status { pass, fail, inconclusive };
  Status status = Status::inconclusive;
  std::vector<std::string> lines;  // one human-readable line per check
  std::map<Index, double> naive_slope;            // per n_r, log-log slope of total time in k
  std::map<Index, double> small_k_reservoir_ratio;  // per n_r, max/min of the reservoir phase
  double large_vs_small = 0.0;  // large_k / small_k total at the largest k and n_r
};

/// (a) naive total time slope in k >= 0.8, (b) small_k reservoir phase varies <= 1.5x,
/// (c) large_k beats small_k at the largest k for the largest reservoir.
/// Fewer than 4 k values or a span under 8x gives Status::inconclusive.
ScalingVerdict check_scaling(const BenchTable& table);

std::string to_string(ScalingVerdict::Status s);

}  // namespace esncv
