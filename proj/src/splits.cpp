#include "esncv/splits.hpp"

#include <algorithm>
#include <cmath>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

std::string fmt_range(const Range& r) {
  return "[" + std::to_string(r.begin) + "," + std::to_string(r.end) + ")";
}

/// Validation windows laid over `region`: k equal folds (last absorbs the
/// remainder) or k windows of `val_len` ending flush with the region end.
std::vector<Range> place_windows(const SchemeSpec& spec, Range region) {
  const Index span = region.size();
  std::vector<Range> windows;
  if (spec.folding == Folding::k_fold) {
    const Index fold = span / spec.k;
    if (fold < 1) {
      throw planning_error("k_fold: " + std::to_string(spec.k) + " folds do not fit into " +
                           std::to_string(span) + " usable indices");
    }
    for (Index i = 0; i < spec.k; ++i) {
      const Index begin = region.begin + i * fold;
      windows.push_back({begin, i + 1 == spec.k ? region.end : begin + fold});
    }
    return windows;
  }
  if (spec.val_len > span) {
    throw planning_error("k_step: val_len " + std::to_string(spec.val_len) + " exceeds the " +
                         std::to_string(span) + " indices available for validation windows");
  }
  Index step = 0;
  if (spec.k > 1) {
    step = (span - spec.val_len) / (spec.k - 1);
    if (step < 1) {
      throw planning_error("k_step: " + std::to_string(spec.k) + " windows of length " +
                           std::to_string(spec.val_len) + " leave a step < 1 in " +
                           std::to_string(span) + " indices");
    }
  }
  for (Index i = 0; i < spec.k; ++i) {
    const Index begin = region.end - spec.val_len - (spec.k - 1 - i) * step;
    windows.push_back({begin, begin + spec.val_len});
  }
  return windows;
}

/// `whole` minus the sorted, disjoint `holes`.
std::vector<Range> complement(Range whole, std::vector<Range> holes) {
  std::sort(holes.begin(), holes.end(), [](const Range& a, const Range& b) { return a.begin < b.begin; });
  std::vector<Range> out;
  Index cursor = whole.begin;
  for (const Range& h : holes) {
    if (h.begin > cursor) out.push_back({cursor, std::min(h.begin, whole.end)});
    cursor = std::max(cursor, h.end);
  }
  if (cursor < whole.end) out.push_back({cursor, whole.end});
  return out;
}

void check_spec(const SchemeSpec& spec, Index trainval_len, Index washout) {
  if (washout < 0) throw planning_error("washout must be >= 0");
  if (spec.k < 1) throw planning_error("k must be >= 1");
  if (trainval_len < washout + spec.k) {
    throw planning_error("trainval_len (" + std::to_string(trainval_len) +
                         ") must be at least washout + k (" + std::to_string(washout + spec.k) + ")");
  }
  switch (spec.scheme) {
    case Scheme::sv:
      if (spec.k != 1) throw planning_error("SV requires k = 1");
      if (spec.val_len < 1) throw planning_error("SV requires val_len >= 1");
      break;
    case Scheme::cv:
      if (spec.folding == Folding::k_fold && spec.k < 2) throw planning_error("k_fold CV requires k >= 2");
      break;
    case Scheme::av:
    case Scheme::fv:
      if (!(spec.min_ratio > 0.0 && spec.min_ratio < 1.0)) {
        throw planning_error(std::string(to_string(spec.scheme)) + " requires min_ratio in (0, 1)");
      }
      break;
  }
  if (spec.folding == Folding::k_step && spec.val_len < 1) throw planning_error("k_step requires val_len >= 1");
  if (spec.scheme != Scheme::cv && (spec.gap == GapMode::after || spec.gap == GapMode::both)) {
    throw planning_error("gaps after the validation window only apply to CV; " +
                         std::string(to_string(spec.scheme)) + " never trains on later data");
  }
  if (spec.gap_len && *spec.gap_len < 0) throw planning_error("gap_len must be >= 0");
}

}  // namespace

Index Split::train_size() const {
  Index n = 0;
  for (const Range& r : train_segments) n += r.size();
  return n;
}

SplitPlan plan_splits(const SchemeSpec& spec, Index trainval_len, Index washout) {
  check_spec(spec, trainval_len, washout);
  const Range usable{washout, trainval_len};

  std::vector<Range> windows;
  Index min_len = 0;
  if (spec.scheme == Scheme::sv) {
    if (spec.val_len >= usable.size()) throw planning_error("SV: val_len leaves no training data");
    windows.push_back({trainval_len - spec.val_len, trainval_len});
  } else if (spec.scheme == Scheme::cv) {
    windows = place_windows(spec, usable);
  } else {
    min_len = static_cast<Index>(std::ceil(spec.min_ratio * static_cast<double>(usable.size()) - 1e-9));
    if (min_len >= usable.size()) {
      throw planning_error("min_ratio " + std::to_string(spec.min_ratio) + " leaves no room for validation");
    }
    windows = place_windows(spec, {washout + min_len, trainval_len});
  }

  SplitPlan plan{{}, trainval_len, washout};
  for (const Range& val : windows) {
    const Index g = spec.gap == GapMode::none ? 0 : spec.gap_len.value_or(val.size());
    Split split;
    split.val_range = val;
    if ((spec.gap == GapMode::before || spec.gap == GapMode::both) && g > 0) {
      const Range gap{std::max(washout, val.begin - g), val.begin};
      if (!gap.empty()) split.gap_ranges.push_back(gap);
    }
    if ((spec.gap == GapMode::after || spec.gap == GapMode::both) && g > 0) {
      const Range gap{val.end, std::min(trainval_len, val.end + g)};
      if (!gap.empty()) split.gap_ranges.push_back(gap);
    }
    const Index train_end = val.begin - (spec.gap == GapMode::before ? g : 0);
    switch (spec.scheme) {
      case Scheme::cv: {
        std::vector<Range> holes = split.gap_ranges;
        holes.push_back(val);
        split.train_segments = complement(usable, holes);
        break;
      }
      case Scheme::sv:
      case Scheme::av:
        if (train_end > washout) split.train_segments.push_back({washout, train_end});
        break;
      case Scheme::fv: {
        const Range train{std::max(washout, train_end - min_len), train_end};
        if (!train.empty()) split.train_segments.push_back(train);
        break;
      }
    }
    if (split.train_size() == 0) {
      throw planning_error("split validating " + fmt_range(val) + " has an empty training set");
    }
    plan.splits.push_back(std::move(split));
  }
  return plan;
}

std::vector<std::string> validate_plan(const SplitPlan& plan) {
  std::vector<std::string> issues;
  if (plan.trainval_len <= 0) issues.push_back("trainval_len must be positive");
  if (plan.washout < 0 || plan.washout >= plan.trainval_len) issues.push_back("washout outside [0, trainval_len)");
  if (plan.splits.empty()) issues.push_back("plan has no splits");
  const Range usable{plan.washout, plan.trainval_len};

  for (std::size_t s = 0; s < plan.splits.size(); ++s) {
    const Split& split = plan.splits[s];
    const std::string tag = "split " + std::to_string(s) + ": ";
    std::vector<std::pair<std::string, Range>> parts;
    for (const Range& r : split.train_segments) parts.emplace_back("train " + fmt_range(r), r);
    for (const Range& r : split.gap_ranges) parts.emplace_back("gap " + fmt_range(r), r);
    parts.emplace_back("val " + fmt_range(split.val_range), split.val_range);

    for (const auto& [name, r] : parts) {
      if (r.empty()) issues.push_back(tag + name + " is empty");
      if (r.begin < usable.begin || r.end > usable.end) {
        issues.push_back(tag + name + " leaves the usable region " + fmt_range(usable));
      }
    }
    for (std::size_t a = 0; a < parts.size(); ++a) {
      for (std::size_t b = a + 1; b < parts.size(); ++b) {
        if (parts[a].second.overlaps(parts[b].second)) {
          issues.push_back(tag + parts[a].first + " overlaps " + parts[b].first);
        }
      }
    }
    if (split.train_size() <= 0) issues.push_back(tag + "empty training set");
    if (s > 0 && split.val_range.begin < plan.splits[s - 1].val_range.begin) {
      issues.push_back(tag + "validation windows are not ordered left to right");
    }
  }
  return issues;
}

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::sv: return "SV";
    case Scheme::cv: return "CV";
    case Scheme::av: return "AV";
    case Scheme::fv: return "FV";
  }
  return "?";
}

std::string_view to_string(Folding f) { return f == Folding::k_fold ? "k_fold" : "k_step"; }

std::string_view to_string(GapMode g) {
  switch (g) {
    case GapMode::none: return "none";
    case GapMode::before: return "before";
    case GapMode::after: return "after";
    case GapMode::both: return "both";
  }
  return "?";
}

Scheme parse_scheme(std::string_view s) {
  if (s == "SV" || s == "sv") return Scheme::sv;
  if (s == "CV" || s == "cv") return Scheme::cv;
  if (s == "AV" || s == "av") return Scheme::av;
  if (s == "FV" || s == "fv") return Scheme::fv;
  throw config_error("unknown scheme '" + std::string(s) + "' (expected SV, CV, AV or FV)");
}

Folding parse_folding(std::string_view s) {
  if (s == "k_fold") return Folding::k_fold;
  if (s == "k_step") return Folding::k_step;
  throw config_error("unknown folding '" + std::string(s) + "' (expected k_fold or k_step)");
}

GapMode parse_gap(std::string_view s) {
  if (s == "none") return GapMode::none;
  if (s == "before") return GapMode::before;
  if (s == "after") return GapMode::after;
  if (s == "both") return GapMode::both;
  throw config_error("unknown gap '" + std::string(s) + "' (expected none, before, after or both)");
}

std::string describe(const SchemeSpec& spec) {
  std::string out(to_string(spec.scheme));
  if (spec.scheme != Scheme::sv) out += " " + std::string(to_string(spec.folding));
  switch (spec.gap) {
    case GapMode::none: break;
    case GapMode::before: out += " _V"; break;
    case GapMode::after: out += " V_"; break;
    case GapMode::both: out += " _V_"; break;
  }
  return out;
}

}  // namespace esncv
