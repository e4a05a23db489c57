#include <vector>

#include "doctest.h"
#include "esncv/errors.hpp"
#include "esncv/splits.hpp"

using namespace esncv;

namespace {

SchemeSpec spec(Scheme s, Folding f, Index k, Index val_len = 0, double min_ratio = 0.0, GapMode gap = GapMode::none) {
  SchemeSpec out;
  out.scheme = s;
  out.folding = f;
  out.k = k;
  out.val_len = val_len;
  out.min_ratio = min_ratio;
  out.gap = gap;
  return out;
}

std::vector<bool> train_mask(const Split& split, Index n) {
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  for (const Range& r : split.train_segments) {
    for (Index i = r.begin; i < r.end; ++i) mask[static_cast<std::size_t>(i)] = true;
  }
  return mask;
}

}  // namespace

TEST_CASE("k_fold CV arithmetic") {
  const SplitPlan plan = plan_splits(spec(Scheme::cv, Folding::k_fold, 5), 100, 0);
  REQUIRE(plan.splits.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(plan.splits[i].val_range == Range{static_cast<Index>(20 * i), static_cast<Index>(20 * i + 20)});
    CHECK(plan.splits[i].train_size() == 80);
  }
  CHECK(validate_plan(plan).empty());
}

TEST_CASE("k_fold CV coverage histogram") {
  for (auto [n, k, w] : {std::tuple<Index, Index, Index>{100, 5, 0}, {103, 7, 0}, {250, 10, 17}, {40, 40, 0}}) {
    const SplitPlan plan = plan_splits(spec(Scheme::cv, Folding::k_fold, k), n, w);
    std::vector<int> train(static_cast<std::size_t>(n), 0), val(static_cast<std::size_t>(n), 0);
    for (const Split& s : plan.splits) {
      for (const Range& r : s.train_segments) {
        for (Index i = r.begin; i < r.end; ++i) ++train[static_cast<std::size_t>(i)];
      }
      for (Index i = s.val_range.begin; i < s.val_range.end; ++i) ++val[static_cast<std::size_t>(i)];
    }
    for (Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (i < w) {
        CHECK(train[u] == 0);
        CHECK(val[u] == 0);
      } else {
        CHECK(train[u] == k - 1);
        CHECK(val[u] == 1);
      }
    }
    // Last fold absorbs the remainder.
    const Index base = (n - w) / k;
    for (std::size_t i = 0; i + 1 < plan.splits.size(); ++i) CHECK(plan.splits[i].val_range.size() == base);
    CHECK(plan.splits.back().val_range.size() == base + (n - w) % k);
    CHECK(validate_plan(plan).empty());
  }
}

TEST_CASE("Labor-shaped k_step CV") {
  const SplitPlan plan = plan_splits(spec(Scheme::cv, Folding::k_step, 34, 10), 350, 0);
  REQUIRE(plan.splits.size() == 34);
  for (const Split& s : plan.splits) CHECK(s.val_range.size() == 10);
  CHECK(plan.splits.back().val_range.end == 350);
  for (std::size_t i = 1; i < plan.splits.size(); ++i) {
    CHECK(plan.splits[i].val_range.begin > plan.splits[i - 1].val_range.begin);
  }
  CHECK(validate_plan(plan).empty());
}

TEST_CASE("AV hand-enumerated windows") {
  const SplitPlan plan = plan_splits(spec(Scheme::av, Folding::k_step, 5, 10, 0.5), 100, 0);
  REQUIRE(plan.splits.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const Index vb = 50 + 10 * static_cast<Index>(i);
    CHECK(plan.splits[i].val_range == Range{vb, vb + 10});
    REQUIRE(plan.splits[i].train_segments.size() == 1);
    CHECK(plan.splits[i].train_segments[0] == Range{0, vb});
  }
}

TEST_CASE("FV trains on a fixed window directly before validation") {
  const SplitPlan plan = plan_splits(spec(Scheme::fv, Folding::k_step, 5, 10, 0.5), 100, 0);
  for (std::size_t i = 0; i < 5; ++i) {
    const Index vb = 50 + 10 * static_cast<Index>(i);
    REQUIRE(plan.splits[i].train_segments.size() == 1);
    CHECK(plan.splits[i].train_segments[0] == Range{vb - 50, vb});
  }
}

TEST_CASE("SV geometry and its relation to AV") {
  const SplitPlan sv = plan_splits(spec(Scheme::sv, Folding::k_fold, 1, 20), 200, 10);
  REQUIRE(sv.splits.size() == 1);
  CHECK(sv.splits[0].val_range == Range{180, 200});
  CHECK(sv.splits[0].train_segments == std::vector<Range>{{10, 180}});

  for (GapMode g : {GapMode::none, GapMode::before}) {
    const SplitPlan s = plan_splits(spec(Scheme::sv, Folding::k_fold, 1, 20, 0.0, g), 200, 10);
    const SplitPlan a = plan_splits(spec(Scheme::av, Folding::k_step, 4, 20, 0.5, g), 200, 10);
    CHECK(s.splits[0] == a.splits.back());
  }
}

TEST_CASE("k_step with step equal to the window reproduces k_fold") {
  const SplitPlan fold = plan_splits(spec(Scheme::cv, Folding::k_fold, 10), 210, 10);
  const SplitPlan step = plan_splits(spec(Scheme::cv, Folding::k_step, 10, 20), 210, 10);
  CHECK(fold.splits == step.splits);
}

TEST_CASE("k = T' is leave-one-out") {
  const SplitPlan plan = plan_splits(spec(Scheme::cv, Folding::k_fold, 30), 30, 0);
  REQUIRE(plan.splits.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(plan.splits[i].val_range.size() == 1);
    CHECK(plan.splits[i].train_size() == 29);
  }
}

TEST_CASE("gaps are excluded and never enlarge training sets") {
  for (GapMode g : {GapMode::before, GapMode::after, GapMode::both}) {
    const SplitPlan plain = plan_splits(spec(Scheme::cv, Folding::k_fold, 6), 120, 0);
    const SplitPlan gapped = plan_splits(spec(Scheme::cv, Folding::k_fold, 6, 0, 0.0, g), 120, 0);
    CHECK(validate_plan(gapped).empty());
    for (std::size_t i = 0; i < plain.splits.size(); ++i) {
      const auto a = train_mask(plain.splits[i], 120), b = train_mask(gapped.splits[i], 120);
      for (std::size_t j = 0; j < a.size(); ++j) CHECK((!b[j] || a[j]));
      for (const Range& r : gapped.splits[i].gap_ranges) {
        for (Index j = r.begin; j < r.end; ++j) CHECK_FALSE(b[static_cast<std::size_t>(j)]);
        CHECK(r.size() <= 20);
      }
    }
    // The middle fold has both neighbours, so its gaps have full length.
    const Split& mid = gapped.splits[2];
    Index gap_total = 0;
    for (const Range& r : mid.gap_ranges) gap_total += r.size();
    CHECK(gap_total == (g == GapMode::both ? 40 : 20));
  }
  const SplitPlan av = plan_splits(spec(Scheme::av, Folding::k_step, 3, 10, 0.5, GapMode::before), 100, 0);
  for (const Split& s : av.splits) CHECK(s.train_segments.back().end == s.val_range.begin - 10);
}

TEST_CASE("planning errors") {
  CHECK_THROWS_AS(plan_splits(spec(Scheme::sv, Folding::k_fold, 2, 10), 100, 0), planning_error);
  CHECK_THROWS_AS(plan_splits(spec(Scheme::cv, Folding::k_fold, 1), 100, 0), planning_error);
  CHECK_THROWS_AS(plan_splits(spec(Scheme::cv, Folding::k_step, 5, 0), 100, 0), planning_error);
  CHECK_THROWS_AS(plan_splits(spec(Scheme::av, Folding::k_step, 5, 10, 0.0), 100, 0), planning_error);
  CHECK_THROWS_AS(plan_splits(spec(Scheme::av, Folding::k_step, 5, 10, 0.95), 100, 0), planning_error);
  CHECK_THROWS_AS(plan_splits(spec(Scheme::sv, Folding::k_fold, 1, 100), 100, 0), planning_error);
  CHECK_THROWS_AS(plan_splits(spec(Scheme::cv, Folding::k_fold, 10), 15, 10), planning_error);
  CHECK_THROWS_AS(plan_splits(spec(Scheme::av, Folding::k_step, 3, 10, 0.5, GapMode::after), 100, 0), planning_error);
}

TEST_CASE("validate_plan reports overlaps") {
  SplitPlan plan;
  plan.trainval_len = 10;
  Split s;
  s.train_segments = {{0, 6}};
  s.val_range = {5, 10};
  plan.splits = {s};
  const auto problems = validate_plan(plan);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("overlap") != std::string::npos);
}

TEST_CASE("enum round trips and labels") {
  for (Scheme s : {Scheme::sv, Scheme::cv, Scheme::av, Scheme::fv}) CHECK(parse_scheme(to_string(s)) == s);
  for (GapMode g : {GapMode::none, GapMode::before, GapMode::after, GapMode::both}) CHECK(parse_gap(to_string(g)) == g);
  CHECK(describe(spec(Scheme::cv, Folding::k_fold, 5, 0, 0.0, GapMode::after)) == "CV k_fold V_");
  CHECK(describe(spec(Scheme::sv, Folding::k_fold, 1, 5)) == "SV");
}
