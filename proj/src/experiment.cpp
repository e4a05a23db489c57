#include "esncv/experiment.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "esncv/errors.hpp"

namespace esncv {
namespace {

template <typename T>
T field(const json& obj, const char* key, const T& fallback, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw config_error(where + "." + key + ": unexpected value " + it->dump());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw config_error(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool found = false;
    for (const char* k : known) found = found || key == k;
    if (!found) throw config_error(where + ": unknown key '" + key + "'");
  }
}

AggregateMode parse_aggregate(std::string_view s) {
  if (s == "last_state") return AggregateMode::last_state;
  if (s == "mean_state") return AggregateMode::mean_state;
  throw config_error("unknown aggregate mode '" + std::string(s) + "' (expected last_state or mean_state)");
}

std::string_view to_string(AggregateMode m) { return m == AggregateMode::last_state ? "last_state" : "mean_state"; }

EvalOptions::Memory parse_memory(std::string_view s) {
  if (s == "retain_states") return EvalOptions::Memory::retain_states;
  if (s == "rerun") return EvalOptions::Memory::rerun;
  throw config_error("unknown memory mode '" + std::string(s) + "' (expected retain_states or rerun)");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw config_error(what + " is required");
  if (!std::filesystem::is_regular_file(p)) throw load_error(what + ": file not found: " + p.string());
}

SchemeSpec parse_scheme_spec(const json& j, const std::string& where) {
  reject_unknown(j, {"scheme", "folding", "k", "val_len", "min_ratio", "gap", "gap_len"}, where);
  SchemeSpec s;
  s.scheme = parse_scheme(field<std::string>(j, "scheme", "CV", where));
  s.folding = parse_folding(field<std::string>(j, "folding", "k_fold", where));
  s.k = field<Index>(j, "k", s.scheme == Scheme::sv ? 1 : 0, where);
  s.val_len = field<Index>(j, "val_len", 0, where);
  s.min_ratio = field<double>(j, "min_ratio", 0.0, where);
  s.gap = parse_gap(field<std::string>(j, "gap", "none", where));
  if (j.contains("gap_len") && !j["gap_len"].is_null()) s.gap_len = field<Index>(j, "gap_len", 0, where);
  return s;
}

std::string padded(std::size_t i) {
  std::ostringstream s;
  s << std::setw(2) << std::setfill('0') << i;
  return s.str();
}

void keep_methods(SearchResult& r, const std::vector<FinalMethod>& methods) {
  auto wanted = [&](FinalMethod m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  auto prune = [&](auto& map) {
    for (auto it = map.begin(); it != map.end();) it = wanted(it->first) ? std::next(it) : map.erase(it);
  };
  prune(r.test_nrmse);
  prune(r.test_misclassifications);
  prune(r.test_divergent);
  for (PointReport& p : r.points) {
    if (!p.report) continue;
    prune(p.report->final_models);
    prune(p.report->test_scores);
  }
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view s) {
  if (s == "univariate_csv") return DatasetFormat::univariate_csv;
  if (s == "paired_csv") return DatasetFormat::paired_csv;
  if (s == "japanese_vowels") return DatasetFormat::japanese_vowels;
  throw config_error("unknown dataset format '" + std::string(s) +
                     "' (expected univariate_csv, paired_csv or japanese_vowels)");
}

std::string_view to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::univariate_csv: return "univariate_csv";
    case DatasetFormat::paired_csv: return "paired_csv";
    case DatasetFormat::japanese_vowels: return "japanese_vowels";
  }
  return "?";
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j,
                 {"name", "dataset", "task", "aggregate", "schemes", "grid", "backend", "final_methods", "memory",
                  "divergence_factor", "shuffle_sequences", "output_dir"},
                 "config");
  ExperimentConfig c;
  c.name = field<std::string>(j, "name", c.name, "config");

  if (!j.contains("dataset")) throw config_error("config.dataset is required");
  const json& d = j["dataset"];
  reject_unknown(d, {"format", "path", "train_path", "test_path", "normalization", "test_len", "washout", "target", "fade"},
                 "dataset");
  c.dataset.format = parse_dataset_format(field<std::string>(d, "format", "univariate_csv", "dataset"));
  c.dataset.path = resolve(base_dir, field<std::string>(d, "path", "", "dataset"));
  c.dataset.train_path = resolve(base_dir, field<std::string>(d, "train_path", "", "dataset"));
  c.dataset.test_path = resolve(base_dir, field<std::string>(d, "test_path", "", "dataset"));
  c.dataset.normalization = parse_norm_method(field<std::string>(d, "normalization", "none", "dataset"));
  c.dataset.test_len = field<Index>(d, "test_len", 0, "dataset");
  c.dataset.washout = field<Index>(d, "washout", 0, "dataset");
  c.dataset.target = field<std::string>(d, "target", "values", "dataset");
  c.dataset.fade = field<Index>(d, "fade", 5, "dataset");
  if (c.dataset.target != "values" && c.dataset.target != "events") {
    throw config_error("dataset.target must be 'values' or 'events'");
  }
  if (c.dataset.format == DatasetFormat::japanese_vowels) {
    require_file(c.dataset.train_path, "dataset.train_path");
    require_file(c.dataset.test_path, "dataset.test_path");
  } else {
    require_file(c.dataset.path, "dataset.path");
  }

  const std::string default_task = c.dataset.format == DatasetFormat::japanese_vowels ? "classification"
                                   : c.dataset.format == DatasetFormat::paired_csv    ? "output"
                                                                                      : "generative";
  c.task = parse_task_kind(field<std::string>(j, "task", default_task, "config"));
  if ((c.task == TaskKind::classification) != (c.dataset.format == DatasetFormat::japanese_vowels)) {
    throw config_error("task '" + std::string(to_string(c.task)) + "' does not fit dataset format '" +
                       std::string(to_string(c.dataset.format)) + "'");
  }
  c.aggregate = parse_aggregate(field<std::string>(j, "aggregate", "last_state", "config"));

  if (!j.contains("schemes") || !j["schemes"].is_array() || j["schemes"].empty()) {
    throw config_error("config.schemes must be a non-empty array");
  }
  for (std::size_t i = 0; i < j["schemes"].size(); ++i) {
    c.schemes.push_back(parse_scheme_spec(j["schemes"][i], "schemes[" + std::to_string(i) + "]"));
  }

  if (!j.contains("grid")) throw config_error("config.grid is required");
  const json& g = j["grid"];
  reject_unknown(g, {"alphas", "rhos", "betas", "n_x", "seeds", "input_scale", "w_density"}, "grid");
  c.grid.alphas = field<std::vector<double>>(g, "alphas", {}, "grid");
  c.grid.rhos = field<std::vector<double>>(g, "rhos", {}, "grid");
  c.grid.betas = field<std::vector<double>>(g, "betas", {}, "grid");
  c.grid.n_x = field<Index>(g, "n_x", 50, "grid");
  c.grid.seeds = field<std::vector<std::uint64_t>>(g, "seeds", {0, 1, 2, 3, 4}, "grid");
  c.grid.input_scale = field<double>(g, "input_scale", 1.0, "grid");
  if (g.contains("w_density") && !g["w_density"].is_null()) c.grid.w_density = field<double>(g, "w_density", 0.0, "grid");
  c.grid.validate();

  c.backend = parse_backend(field<std::string>(j, "backend", "large_k", "config"));
  if (j.contains("final_methods")) {
    c.final_methods.clear();
    for (const auto& m : field<std::vector<std::string>>(j, "final_methods", {}, "config")) {
      c.final_methods.push_back(parse_final_method(m));
    }
    if (c.final_methods.empty()) throw config_error("config.final_methods must not be empty");
  }
  c.memory = parse_memory(field<std::string>(j, "memory", "retain_states", "config"));
  c.divergence_factor = field<double>(j, "divergence_factor", 1e6, "config");
  c.shuffle_sequences = field<bool>(j, "shuffle_sequences", true, "config");
  c.output_dir = resolve(base_dir, field<std::string>(j, "output_dir", "results", "config"));
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& config_path) {
  std::ifstream in(config_path);
  if (!in) throw load_error("config file not found: " + config_path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw config_error(config_path.string() + ": " + e.what());
  }
  return parse_experiment(j, config_path.parent_path());
}

json resolved_config(const ExperimentConfig& c) {
  json schemes = json::array();
  for (const SchemeSpec& s : c.schemes) {
    json js = to_json(s);
    js.erase("label");
    schemes.push_back(js);
  }
  json methods = json::array();
  for (FinalMethod m : c.final_methods) methods.push_back(to_string(m));
  return {{"name", c.name},
          {"dataset",
           {{"format", to_string(c.dataset.format)},
            {"path", c.dataset.path.string()},
            {"train_path", c.dataset.train_path.string()},
            {"test_path", c.dataset.test_path.string()},
            {"normalization", to_string(c.dataset.normalization)},
            {"test_len", c.dataset.test_len},
            {"washout", c.dataset.washout},
            {"target", c.dataset.target},
            {"fade", c.dataset.fade}}},
          {"task", to_string(c.task)},
          {"aggregate", to_string(c.aggregate)},
          {"schemes", schemes},
          {"grid", to_json(c.grid)},
          {"backend", to_string(c.backend)},
          {"final_methods", methods},
          {"memory", c.memory == EvalOptions::Memory::retain_states ? "retain_states" : "rerun"},
          {"divergence_factor", c.divergence_factor},
          {"shuffle_sequences", c.shuffle_sequences},
          {"output_dir", c.output_dir.string()}};
}

TaskData build_task(const ExperimentConfig& c) {
  if (c.dataset.format == DatasetFormat::japanese_vowels) {
    SequenceDataset d = load_japanese_vowels(c.dataset.train_path, c.dataset.test_path);
    return make_classification_task(std::move(d.train_sequences), std::move(d.train_labels),
                                    std::move(d.test_sequences), std::move(d.test_labels), d.n_classes, c.aggregate);
  }
  SeriesDataset d = c.dataset.format == DatasetFormat::paired_csv ? load_paired_csv(c.dataset.path)
                                                                  : load_univariate_csv(c.dataset.path);
  d.test_len = c.dataset.test_len;
  d.washout = c.dataset.washout;
  d.validate();
  if (c.dataset.format == DatasetFormat::paired_csv && c.dataset.target == "events") {
    std::vector<Index> events;
    for (Index t = 0; t < d.length(); ++t) {
      if (d.values(1, t) != 0.0) events.push_back(t);
    }
    d.values.row(1) = annotation_targets(d.length(), events, c.dataset.fade).transpose();
  }
  d = normalize(d, c.dataset.normalization);
  if (c.task == TaskKind::generative) {
    if (c.dataset.format == DatasetFormat::paired_csv) throw config_error("generative tasks need a univariate series");
    return make_generative_task(d.values, d.test_len);
  }
  if (d.values.rows() != 2) throw config_error("output tasks need paired input/target columns");
  return make_output_task(d.values.topRows(1), d.values.bottomRows(1), d.test_len);
}

std::string scheme_file_stem(std::size_t index, const SchemeSpec& spec) {
  std::string out = padded(index) + "_" + std::string(to_string(spec.scheme));
  if (spec.scheme != Scheme::sv) out += "_" + std::string(to_string(spec.folding)) + "_k" + std::to_string(spec.k);
  if (spec.gap != GapMode::none) out += "_gap_" + std::string(to_string(spec.gap));
  return out;
}

std::vector<SchemeOutcome> run_experiment(const ExperimentConfig& c, const RunOptions& options, std::ostream& log) {
  const TaskData task = build_task(c);
  const Index washout = c.task == TaskKind::classification ? 0 : c.dataset.washout;

  std::vector<SchemeOutcome> outcomes;
  std::vector<SplitPlan> plans;
  for (std::size_t i = 0; i < c.schemes.size(); ++i) {
    // Planning errors are configuration errors: fail before any computation.
    plans.push_back(plan_splits(c.schemes[i], task.trainval_len(), washout));
    SchemeOutcome o;
    o.spec = c.schemes[i];
    o.report_path = c.output_dir / (scheme_file_stem(i, c.schemes[i]) + ".json");
    if (!options.force && std::filesystem::exists(o.report_path)) {
      throw config_error("refusing to overwrite " + o.report_path.string() + " (use --force)");
    }
    outcomes.push_back(std::move(o));
  }

  const json resolved = resolved_config(c);
  write_text_file(c.output_dir / "resolved_config.json", resolved.dump(2) + "\n", options.force);

  SearchOptions search;
  search.jobs = options.jobs;
  search.eval.memory = c.memory;
  search.eval.divergence_factor = c.divergence_factor;
  search.shuffle_sequences_per_seed = c.shuffle_sequences;

  std::ostringstream summary;
  bool first = true;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    SchemeOutcome& o = outcomes[i];
    const std::string stem = scheme_file_stem(i, o.spec);
    log << "[" << (i + 1) << "/" << outcomes.size() << "] " << describe(o.spec) << ": " << plans[i].splits.size()
        << " split(s), " << c.grid.alphas.size() * c.grid.rhos.size() * c.grid.seeds.size() << " grid points"
        << std::endl;
    try {
      SearchResult r = grid_search(task, plans[i], c.grid, c.backend, search);
      keep_methods(r, c.final_methods);
      json report{{"config", resolved}, {"scheme", to_json(o.spec)}, {"plan", to_json(plans[i])}, {"search", to_json(r)}};
      write_text_file(o.report_path, report.dump(2) + "\n", options.force);
      std::ostringstream table, scatter;
      write_summary_csv(table, o.spec, r);
      write_summary_csv(summary, o.spec, r, first);
      first = false;
      write_scatter_csv(scatter, r);
      write_text_file(c.output_dir / (stem + ".csv"), table.str(), options.force);
      write_text_file(c.output_dir / (stem + "_scatter.csv"), scatter.str(), options.force);
      o.result = std::move(r);
    } catch (const config_error&) {
      throw;
    } catch (const error& e) {
      o.failure = e.what();
      log << "  failed: " << o.failure << std::endl;
    }
  }
  if (!first) write_text_file(c.output_dir / "summary.csv", summary.str(), options.force);

  const bool classification = c.task == TaskKind::classification;
  log << "\n" << std::left << std::setw(20) << "scheme" << std::setw(16) << "final" << std::setw(22) << "val"
      << std::setw(22) << (classification ? "test misclass." : "test NRMSE") << "diverged\n";
  auto cell = [](const CellStats& s) {
    std::ostringstream t;
    t << std::setprecision(4) << s.mean << " +- " << s.std;
    return t.str();
  };
  for (const SchemeOutcome& o : outcomes) {
    if (!o.result) {
      log << std::setw(20) << describe(o.spec) << "FAILED: " << o.failure << "\n";
      continue;
    }
    for (FinalMethod m : c.final_methods) {
      const auto t = o.result->test_nrmse.find(m);
      if (t == o.result->test_nrmse.end()) continue;
      const CellStats& shown = classification ? o.result->test_misclassifications.at(m) : t->second;
      const auto div = o.result->test_divergent.find(m);
      log << std::setw(20) << describe(o.spec) << std::setw(16) << to_string(m) << std::setw(22) << cell(o.result->val)
          << std::setw(22) << cell(shown) << (div == o.result->test_divergent.end() ? 0 : div->second) << "/"
          << t->second.count << "\n";
    }
  }
  log.flush();
  return outcomes;
}

}  // namespace esncv
