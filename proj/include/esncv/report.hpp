#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "json.hpp"

#include "esncv/bench.hpp"
#include "esncv/search.hpp"

namespace esncv {

using nlohmann::json;

json to_json(const SchemeSpec& spec);
json to_json(const SplitPlan& plan);
json to_json(const Readout& readout);
json to_json(const EvaluationReport& report, bool with_readouts = true);
json to_json(const GridSpec& grid);
json to_json(const CellStats& stats);
/// Selection, aggregates and every point's summary; full reports of the per-seed winners.
json to_json(const SearchResult& result);
json to_json(const ScalingVerdict& verdict);

/// One row per final method: scheme, gap variant, method, validation and test aggregates.
void write_summary_csv(std::ostream& out, const SchemeSpec& spec, const SearchResult& result, bool header = true);

/// One row per (grid point, final method): point_id, seed, alpha, rho, beta, val, test.
void write_scatter_csv(std::ostream& out, const SearchResult& result);

void write_bench_csv(std::ostream& out, const BenchTable& table);

/// Writes `text` to `path`; refuses an existing file unless `overwrite`.
void write_text_file(const std::filesystem::path& path, const std::string& text, bool overwrite);

}  // namespace esncv
