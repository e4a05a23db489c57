#include "esncv/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

json range_json(const Range& r) { return json::array({r.begin, r.end}); }

json ranges_json(const std::vector<Range>& rs) {
  json out = json::array();
  for (const Range& r : rs) out.push_back(range_json(r));
  return out;
}

// JSON has no infinity; divergent scores are written as strings so they survive a round trip.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

json to_json(const SchemeSpec& spec) {
  json j{{"scheme", to_string(spec.scheme)},
         {"folding", to_string(spec.folding)},
         {"k", spec.k},
         {"val_len", spec.val_len},
         {"min_ratio", spec.min_ratio},
         {"gap", to_string(spec.gap)},
         {"label", describe(spec)}};
  j["gap_len"] = spec.gap_len ? json(*spec.gap_len) : json(nullptr);
  return j;
}

json to_json(const SplitPlan& plan) {
  json splits = json::array();
  for (std::size_t i = 0; i < plan.splits.size(); ++i) {
    const Split& s = plan.splits[i];
    splits.push_back({{"split", i},
                      {"train", ranges_json(s.train_segments)},
                      {"val", range_json(s.val_range)},
                      {"gaps", ranges_json(s.gap_ranges)}});
  }
  return {{"trainval_len", plan.trainval_len}, {"washout", plan.washout}, {"splits", splits}};
}

json to_json(const Readout& readout) {
  return {{"beta", readout.beta},
          {"condition", number(readout.condition)},
          {"ill_conditioned", readout.ill_conditioned},
          {"w_out", matrix_json(readout.w_out)}};
}

json to_json(const EvaluationReport& report, bool with_readouts) {
  json splits = json::array();
  for (const SplitResult& s : report.per_split) {
    json scores = json::array();
    for (double v : s.beta_scores) scores.push_back(number(v));
    json j{{"split", s.split_index},       {"val_score", number(s.val_score)}, {"best_beta", s.best_beta},
           {"beta_scores", scores},        {"divergent", s.divergent},         {"flagged", s.flagged},
           {"ill_conditioned", s.ill_conditioned}};
    if (s.val_misclassifications) j["val_misclassifications"] = *s.val_misclassifications;
    splits.push_back(std::move(j));
  }
  json finals = json::object();
  for (const auto& [method, readout] : report.final_models) {
    json j{{"beta", readout.beta}, {"ill_conditioned", readout.ill_conditioned}};
    if (with_readouts) j["readout"] = to_json(readout);
    if (auto it = report.test_scores.find(method); it != report.test_scores.end()) {
      j["test_nrmse"] = number(it->second.nrmse);
      j["test_divergent"] = it->second.divergent;
      if (it->second.misclassifications) j["test_misclassifications"] = *it->second.misclassifications;
    }
    finals[std::string(to_string(method))] = std::move(j);
  }
  json timings = json::object();
  for (const auto& [phase, ms] : report.timings_ms) timings[phase] = ms;
  return {{"per_split", splits},
          {"mean_val", number(report.mean_val)},
          {"retrain_beta", report.retrain_beta},
          {"ireg_beta", report.ireg_beta},
          {"final_models", finals},
          {"timings_ms", timings},
          {"woodbury_fallbacks", report.woodbury_fallbacks},
          {"any_divergent", report.any_divergent}};
}

json to_json(const GridSpec& grid) {
  json j{{"alphas", grid.alphas}, {"rhos", grid.rhos},   {"betas", grid.betas},
         {"n_x", grid.n_x},       {"seeds", grid.seeds}, {"input_scale", grid.input_scale}};
  j["w_density"] = grid.w_density ? json(*grid.w_density) : json(nullptr);
  return j;
}

json to_json(const CellStats& stats) {
  return {{"mean", number(stats.mean)},
          {"std", number(stats.std)},
          {"count", stats.count},
          {"single_sample", stats.single_sample}};
}

json to_json(const SearchResult& result) {
  json points = json::array();
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const PointReport& p = result.points[i];
    json j{{"point_id", i}, {"alpha", p.point.alpha}, {"rho", p.point.rho}, {"seed", p.point.seed},
           {"mean_val", number(p.mean_val())}};
    if (p.report) {
      j["retrain_beta"] = p.report->retrain_beta;
      json tests = json::object();
      for (const auto& [method, score] : p.report->test_scores) tests[std::string(to_string(method))] = number(score.nrmse);
      j["test_nrmse"] = tests;
    } else {
      j["failure"] = p.failure;
    }
    points.push_back(std::move(j));
  }
  json selected = json::array();
  for (std::size_t idx : result.per_seed_best) {
    const PointReport& p = result.points[idx];
    selected.push_back({{"point_id", idx},
                        {"seed", p.point.seed},
                        {"alpha", p.point.alpha},
                        {"rho", p.point.rho},
                        {"report", to_json(*p.report)}});
  }
  json test = json::object();
  for (const auto& [method, stats] : result.test_nrmse) {
    json j{{"nrmse", to_json(stats)}};
    if (auto it = result.test_misclassifications.find(method); it != result.test_misclassifications.end()) {
      j["misclassifications"] = to_json(it->second);
    }
    if (auto it = result.test_divergent.find(method); it != result.test_divergent.end()) j["divergent_runs"] = it->second;
    test[std::string(to_string(method))] = std::move(j);
  }
  return {{"best_config", {{"alpha", result.best_alpha}, {"rho", result.best_rho}, {"mean_val", number(result.best_mean_val)}}},
          {"val", to_json(result.val)},
          {"test", test},
          {"per_seed_best", selected},
          {"points", points}};
}

json to_json(const ScalingVerdict& verdict) {
  json slopes = json::object();
  for (const auto& [n_r, s] : verdict.naive_slope) slopes[std::to_string(n_r)] = s;
  json ratios = json::object();
  for (const auto& [n_r, r] : verdict.small_k_reservoir_ratio) ratios[std::to_string(n_r)] = r;
  return {{"status", to_string(verdict.status)},
          {"lines", verdict.lines},
          {"naive_slope", slopes},
          {"small_k_reservoir_ratio", ratios},
          {"large_vs_small", verdict.large_vs_small}};
}

void write_summary_csv(std::ostream& out, const SchemeSpec& spec, const SearchResult& result, bool header) {
  if (header) {
    out << "scheme,gap,final_method,val_mean,val_std,test_mean,test_std,misclass_mean,misclass_std,divergent_runs,runs\n";
  }
  for (const auto& [method, stats] : result.test_nrmse) {
    out << describe({spec.scheme, spec.folding, spec.k, 0, 0.0, GapMode::none, std::nullopt}) << ','
        << to_string(spec.gap) << ',' << to_string(method) << ',' << csv_number(result.val.mean) << ','
        << csv_number(result.val.std) << ',' << csv_number(stats.mean) << ',' << csv_number(stats.std) << ',';
    if (auto it = result.test_misclassifications.find(method); it != result.test_misclassifications.end()) {
      out << csv_number(it->second.mean) << ',' << csv_number(it->second.std);
    } else {
      out << ',';
    }
    const auto div = result.test_divergent.find(method);
    out << ',' << (div == result.test_divergent.end() ? 0 : div->second) << ',' << stats.count << '\n';
  }
}

void write_scatter_csv(std::ostream& out, const SearchResult& result) {
  out << "point_id,seed,alpha,rho,beta,val,final_method,test\n";
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const PointReport& p = result.points[i];
    if (!p.report) continue;
    for (const auto& [method, score] : p.report->test_scores) {
      const auto model = p.report->final_models.find(method);
      out << i << ',' << p.point.seed << ',' << csv_number(p.point.alpha) << ',' << csv_number(p.point.rho) << ','
          << csv_number(model == p.report->final_models.end() ? p.report->retrain_beta : model->second.beta) << ','
          << csv_number(p.report->mean_val) << ',' << to_string(method) << ',' << csv_number(score.nrmse) << '\n';
    }
  }
}

void write_bench_csv(std::ostream& out, const BenchTable& table) {
  out << "backend,n_r,k,phase,mean_ms,min_ms\n";
  for (const BenchRow& r : table) {
    out << to_string(r.backend) << ',' << r.n_r << ',' << r.k << ',' << r.phase << ',' << csv_number(r.mean_ms) << ','
        << csv_number(r.min_ms) << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text, bool overwrite) {
  if (!overwrite && std::filesystem::exists(path)) {
    throw config_error("refusing to overwrite " + path.string() + " (use --force)");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw error("could not write " + path.string());
}

}  // namespace esncv
