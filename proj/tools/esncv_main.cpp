#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "esncv/errors.hpp"
#include "esncv/experiment.hpp"
#include "esncv/selftest.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

int cmd_run(const std::string& config_path, const esncv::RunOptions& options) {
  const esncv::ExperimentConfig config = esncv::load_experiment(config_path);
  const auto outcomes = esncv::run_experiment(config, options, std::cout);
  for (const auto& o : outcomes) {
    if (!o.result) return kFailed;
  }
  std::cout << "reports written to " << config.output_dir.string() << "\n";
  return kOk;
}

int cmd_bench(const esncv::BenchSpec& spec, const std::string& out, bool force) {
  spec.validate();
  if (!force && std::filesystem::exists(out)) throw esncv::config_error("refusing to overwrite " + out + " (use --force)");
  const esncv::BenchTable table = esncv::run_bench(spec, [](const esncv::BenchRow& r) {
    if (r.phase == "total") {
      std::cerr << esncv::to_string(r.backend) << " n_r=" << r.n_r << " k=" << r.k << ": " << std::fixed
                << std::setprecision(2) << r.min_ms << " ms (min)\n";
    }
  });
  std::ostringstream csv;
  esncv::write_bench_csv(csv, table);
  esncv::write_text_file(out, csv.str(), force);
  const esncv::ScalingVerdict verdict = esncv::check_scaling(table);
  for (const std::string& line : verdict.lines) std::cout << line << "\n";
  std::cout << "verdict: " << esncv::to_string(verdict.status) << "\n";
  return verdict.status == esncv::ScalingVerdict::Status::fail ? kFailed : kOk;
}

int cmd_selftest(bool sabotage) {
  esncv::EquivalenceSpec spec;
  spec.sabotage = sabotage;
  const esncv::EquivalenceResult r = esncv::backend_equivalence(spec);
  for (const auto& c : r.cases) {
    std::cout << (c.pass ? "ok   " : "FAIL ") << std::left << std::setw(15) << c.level << std::setw(8)
              << esncv::to_string(c.backend) << " k=" << std::setw(4) << c.k << " beta=" << std::setw(7) << c.beta
              << " max rel dev " << std::scientific << std::setprecision(2) << c.max_rel_error << " (tol "
              << c.tolerance << ")" << std::defaultfloat << "\n";
  }
  std::cout << "max relative deviation " << std::scientific << r.max_rel_error << std::defaultfloat << " in "
            << r.seconds << " s: " << (r.pass ? "pass" : "FAIL") << "\n";
  return r.pass ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Echo state network validation schemes and fast cross-validation"};
  app.require_subcommand(1);

  std::string config_path;
  esncv::RunOptions run_options;
  run_options.jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* run = app.add_subcommand("run", "Grid-search every scheme of an experiment config");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_flag("--force", run_options.force, "Overwrite existing outputs");
  run->add_option("--jobs", run_options.jobs, "Worker threads")->check(CLI::PositiveNumber);

  esncv::BenchSpec bench_spec;
  std::string bench_out = "bench.csv";
  bool bench_force = false;
  std::vector<std::string> backend_names;
  auto* bench = app.add_subcommand("bench", "Time the cross-validation backends against the fold count");
  bench->add_option("--T", bench_spec.T, "Series length")->capture_default_str();
  bench->add_option("--sizes", bench_spec.sizes, "Extended reservoir sizes n_r")->delimiter(',')->capture_default_str();
  bench->add_option("--folds", bench_spec.folds, "Fold counts k")->delimiter(',')->capture_default_str();
  bench->add_option("--repeats", bench_spec.repeats, "Timed repeats per cell")->capture_default_str();
  bench->add_option("--backends", backend_names, "Subset of naive,small_k,large_k")->delimiter(',');
  bench->add_option("--seed", bench_spec.seed, "Seed for data and weights")->capture_default_str();
  bench->add_option("--out", bench_out, "CSV output path")->capture_default_str();
  bench->add_flag("--force", bench_force, "Overwrite the CSV");

  bool sabotage = false;
  auto* selftest = app.add_subcommand("selftest", "Check the fast backends against per-split retraining");
  selftest->add_flag("--sabotage", sabotage, "Break the fold subtraction to confirm the check fails")
      ->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, run_options);
    if (*bench) {
      if (!backend_names.empty()) {
        bench_spec.backends.clear();
        for (const auto& b : backend_names) bench_spec.backends.push_back(esncv::parse_backend(b));
      }
      return cmd_bench(bench_spec, bench_out, bench_force);
    }
    if (*selftest) return cmd_selftest(sabotage);
  } catch (const esncv::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const esncv::planning_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const esncv::load_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}
