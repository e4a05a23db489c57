#include <cmath>

#include "doctest.h"
#include "esncv/bench.hpp"
#include "esncv/errors.hpp"

using namespace esncv;

namespace {

BenchTable synthetic(double naive_power, double reservoir_spread, double large_over_small) {
  BenchTable t;
  const std::vector<Index> ks{2, 5, 21, 63, 126};
  for (Index n_r : {50, 500}) {
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double k = static_cast<double>(ks[i]);
      const double naive = std::pow(k, naive_power);
      t.push_back({Backend::naive, n_r, ks[i], "total", naive, naive});
      const double res = 10.0 * (i == 0 ? reservoir_spread : 1.0);
      t.push_back({Backend::small_k, n_r, ks[i], "reservoir", res, res});
      t.push_back({Backend::small_k, n_r, ks[i], "total", 20.0 + k, 20.0 + k});
      t.push_back({Backend::large_k, n_r, ks[i], "total", large_over_small * (20.0 + k), large_over_small * (20.0 + k)});
    }
  }
  return t;
}

}  // namespace

TEST_CASE("check_scaling on constructed tables") {
  const ScalingVerdict ok = check_scaling(synthetic(1.0, 1.0, 0.5));
  CHECK(ok.status == ScalingVerdict::Status::pass);
  CHECK(ok.naive_slope.at(500) == doctest::Approx(1.0));
  CHECK(ok.small_k_reservoir_ratio.at(50) == doctest::Approx(1.0));

  CHECK(check_scaling(synthetic(0.5, 1.0, 0.5)).status == ScalingVerdict::Status::fail);
  CHECK(check_scaling(synthetic(1.0, 2.0, 0.5)).status == ScalingVerdict::Status::fail);
  CHECK(check_scaling(synthetic(1.0, 1.0, 1.5)).status == ScalingVerdict::Status::fail);
}

TEST_CASE("check_scaling needs coverage") {
  BenchTable t;
  t.push_back({Backend::naive, 50, 3, "total", 1.0, 1.0});
  CHECK(check_scaling(t).status == ScalingVerdict::Status::inconclusive);
  BenchTable narrow = synthetic(1.0, 1.0, 0.5);
  std::erase_if(narrow, [](const BenchRow& r) { return r.k > 10 && r.k != 21; });
  CHECK(check_scaling(narrow).status == ScalingVerdict::Status::inconclusive);
}

TEST_CASE("run_bench emits one row per phase and cell") {
  BenchSpec spec;
  spec.T = 100;
  spec.sizes = {8};
  spec.folds = {2, 4};
  spec.repeats = 2;
  const BenchTable t = run_bench(spec);
  CHECK(t.size() == 3 * 2 * 5);
  for (const BenchRow& r : t) {
    CHECK(r.min_ms <= r.mean_ms + 1e-12);
    CHECK(r.min_ms >= 0.0);
  }
  spec.folds = {101};
  CHECK_THROWS_AS(run_bench(spec), config_error);
}
