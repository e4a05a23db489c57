#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace esncv {

using Eigen::Index;

/// Half-open index interval [begin, end).
struct Range {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(Index i) const { return i >= begin && i < end; }
  bool overlaps(const Range& o) const { return begin < o.end && o.begin < end; }
  friend bool operator==(const Range&, const Range&) = default;
};

enum class Scheme { sv, cv, av, fv };
enum class Folding { k_fold, k_step };
enum class GapMode { none, before, after, both };

struct SchemeSpec {
  Scheme scheme = Scheme::cv;
  Folding folding = Folding::k_fold;
  Index k = 1;
  Index val_len = 0;       // window length; required for SV and k_step
  double min_ratio = 0.0;  // AV minimal / FV fixed training share of the usable data
  GapMode gap = GapMode::none;
  std::optional<Index> gap_len;  // defaults to the validation window length
};

struct Split {
  std::vector<Range> train_segments;
  Range val_range;
  std::vector<Range> gap_ranges;

  Index train_size() const;
  friend bool operator==(const Split&, const Split&) = default;
};

/// Train/validation geometry over the trainval region [0, trainval_len).
/// Indices below `washout` are run through the reservoir but never trained or validated on.
struct SplitPlan {
  std::vector<Split> splits;
  Index trainval_len = 0;
  Index washout = 0;
};

/// Builds the splits for `spec`. Throws planning_error naming the first violated constraint.
SplitPlan plan_splits(const SchemeSpec& spec, Index trainval_len, Index washout);

/// Checks every SplitPlan invariant; an empty result means the plan is valid.
std::vector<std::string> validate_plan(const SplitPlan& plan);

std::string_view to_string(Scheme s);
std::string_view to_string(Folding f);
std::string_view to_string(GapMode g);
Scheme parse_scheme(std::string_view s);
Folding parse_folding(std::string_view s);
GapMode parse_gap(std::string_view s);

/// Short label such as "CV k_fold V_" used in report tables.
std::string describe(const SchemeSpec& spec);

}  // namespace esncv
