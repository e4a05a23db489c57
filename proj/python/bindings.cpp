#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "esncv/errors.hpp"
#include "esncv/experiment.hpp"
#include "esncv/selftest.hpp"

namespace py = pybind11;
using namespace esncv;

namespace {

// Reports cross the boundary as JSON text and come back as plain dicts.
py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Backend backend_arg(const std::string& s) { return parse_backend(s); }

}  // namespace

PYBIND11_MODULE(_esncv, m) {
  m.doc() = "Echo state network validation schemes with fold-subtraction and Woodbury cross-validation";

  auto base = py::register_exception<error>(m, "EsncvError", PyExc_RuntimeError);
  py::register_exception<config_error>(m, "ConfigError", base.ptr());
  py::register_exception<planning_error>(m, "PlanningError", base.ptr());
  py::register_exception<load_error>(m, "LoadError", base.ptr());
  py::register_exception<numerical_error>(m, "NumericalError", base.ptr());
  py::register_exception<contract_error>(m, "ContractError", base.ptr());

  py::class_<ReservoirConfig>(m, "ReservoirConfig")
      .def(py::init([](Index n_x, Index n_u, double alpha, double rho, std::optional<double> w_density,
                       double input_scale, std::uint64_t seed) {
             ReservoirConfig c;
             c.n_x = n_x;
             c.n_u = n_u;
             c.alpha = alpha;
             c.rho = rho;
             c.w_density = w_density;
             c.input_scale = input_scale;
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("n_x") = 50, py::arg("n_u") = 1, py::arg("alpha") = 1.0, py::arg("rho") = 1.0,
           py::arg("w_density") = py::none(), py::arg("input_scale") = 1.0, py::arg("seed") = 0)
      .def_readwrite("n_x", &ReservoirConfig::n_x)
      .def_readwrite("n_u", &ReservoirConfig::n_u)
      .def_readwrite("alpha", &ReservoirConfig::alpha)
      .def_readwrite("rho", &ReservoirConfig::rho)
      .def_readwrite("w_density", &ReservoirConfig::w_density)
      .def_readwrite("input_scale", &ReservoirConfig::input_scale)
      .def_readwrite("seed", &ReservoirConfig::seed)
      .def_property_readonly("n_r", &ReservoirConfig::n_r);

  m.def(
      "generate_weights",
      [](const ReservoirConfig& c) {
        const ReservoirWeights w = generate_weights(c);
        return py::make_tuple(w.w_in, MatrixXd(w.w));
      },
      py::arg("config"), "Returns (W_in, W) as dense arrays.");

  m.def(
      "harvest",
      [](const ReservoirConfig& c, const MatrixXd& inputs, std::optional<VectorXd> x0, Index washout) {
        const ReservoirWeights w = generate_weights(c);
        const StateHarvest h = harvest(w, c, inputs, x0 ? *x0 : VectorXd::Zero(c.n_x), washout);
        return py::make_tuple(h.x_ext, h.x_final);
      },
      py::arg("config"), py::arg("inputs"), py::arg("x0") = py::none(), py::arg("washout") = 0,
      "Extended states [1; u; x] (n_r x L) and the final reservoir state.");

  m.def(
      "nrmse", [](const MatrixXd& pred, const MatrixXd& target) { return nrmse(pred, target); }, py::arg("pred"),
      py::arg("target"));

  py::class_<SchemeSpec>(m, "SchemeSpec")
      .def(py::init([](const std::string& scheme, const std::string& folding, Index k, Index val_len,
                       double min_ratio, const std::string& gap, std::optional<Index> gap_len) {
             SchemeSpec s;
             s.scheme = parse_scheme(scheme);
             s.folding = parse_folding(folding);
             s.k = k;
             s.val_len = val_len;
             s.min_ratio = min_ratio;
             s.gap = parse_gap(gap);
             s.gap_len = gap_len;
             return s;
           }),
           py::arg("scheme") = "CV", py::arg("folding") = "k_fold", py::arg("k") = 1, py::arg("val_len") = 0,
           py::arg("min_ratio") = 0.0, py::arg("gap") = "none", py::arg("gap_len") = py::none())
      .def("__repr__", [](const SchemeSpec& s) { return "<SchemeSpec " + describe(s) + ">"; });

  py::class_<SplitPlan>(m, "SplitPlan")
      .def_readonly("trainval_len", &SplitPlan::trainval_len)
      .def_readonly("washout", &SplitPlan::washout)
      .def("__len__", [](const SplitPlan& p) { return p.splits.size(); })
      .def("to_dict", [](const SplitPlan& p) { return to_python(to_json(p)); });

  m.def("plan_splits", &plan_splits, py::arg("spec"), py::arg("trainval_len"), py::arg("washout") = 0);

  py::class_<TaskData>(m, "TaskData")
      .def_property_readonly("kind", [](const TaskData& t) { return std::string(to_string(t.kind)); })
      .def_property_readonly("trainval_len", &TaskData::trainval_len)
      .def_property_readonly("n_u", &TaskData::n_u)
      .def_property_readonly("n_y", &TaskData::n_y);

  m.def("make_generative_task", &make_generative_task, py::arg("series"), py::arg("test_len"));
  m.def("make_output_task", &make_output_task, py::arg("inputs"), py::arg("targets"), py::arg("test_len"));
  m.def(
      "make_classification_task",
      [](std::vector<MatrixXd> train, std::vector<int> train_labels, std::vector<MatrixXd> test,
         std::vector<int> test_labels, int n_classes, const std::string& aggregate) {
        return make_classification_task(std::move(train), std::move(train_labels), std::move(test),
                                        std::move(test_labels), n_classes,
                                        aggregate == "mean_state" ? AggregateMode::mean_state : AggregateMode::last_state);
      },
      py::arg("train_sequences"), py::arg("train_labels"), py::arg("test_sequences"), py::arg("test_labels"),
      py::arg("n_classes"), py::arg("aggregate") = "last_state");

  m.def(
      "cross_validate",
      [](const TaskData& task, const SplitPlan& plan, const ReservoirConfig& c, const std::vector<double>& betas,
         const std::string& backend) {
        const ReservoirWeights w = generate_weights(c);
        CrossValidation cv;
        {
          py::gil_scoped_release release;
          cv = cross_validate(task, plan, c, w, betas, backend_arg(backend));
        }
        py::list out;
        for (const SplitResult& s : cv.splits) {
          py::dict d;
          d["split"] = s.split_index;
          d["val_score"] = s.val_score;
          d["best_beta"] = s.best_beta;
          d["beta_scores"] = s.beta_scores;
          d["w_out"] = s.readout ? py::cast(s.readout->w_out) : py::none();
          out.append(d);
        }
        return out;
      },
      py::arg("task"), py::arg("plan"), py::arg("config"), py::arg("betas"), py::arg("backend") = "large_k",
      "Per-split validation results, including each split's readout at its best beta.");

  m.def(
      "evaluate",
      [](const TaskData& task, const SplitPlan& plan, const ReservoirConfig& c, const std::vector<double>& betas,
         const std::string& backend) {
        const ReservoirWeights w = generate_weights(c);
        EvaluationReport r;
        {
          py::gil_scoped_release release;
          r = evaluate(task, plan, c, w, betas, backend_arg(backend));
        }
        return to_python(to_json(r));
      },
      py::arg("task"), py::arg("plan"), py::arg("config"), py::arg("betas"), py::arg("backend") = "large_k");

  m.def(
      "grid_search",
      [](const TaskData& task, const SplitPlan& plan, std::vector<double> alphas, std::vector<double> rhos,
         std::vector<double> betas, Index n_x, std::vector<std::uint64_t> seeds, const std::string& backend,
         unsigned jobs) {
        GridSpec g;
        g.alphas = std::move(alphas);
        g.rhos = std::move(rhos);
        g.betas = std::move(betas);
        g.n_x = n_x;
        g.seeds = std::move(seeds);
        SearchOptions opt;
        opt.jobs = jobs;
        opt.shuffle_sequences_per_seed = true;
        SearchResult r;
        {
          py::gil_scoped_release release;
          r = grid_search(task, plan, g, backend_arg(backend), opt);
        }
        return to_python(to_json(r));
      },
      py::arg("task"), py::arg("plan"), py::arg("alphas"), py::arg("rhos"), py::arg("betas"), py::arg("n_x") = 50,
      py::arg("seeds") = std::vector<std::uint64_t>{0, 1, 2, 3, 4}, py::arg("backend") = "large_k",
      py::arg("jobs") = 0);

  m.def(
      "backend_equivalence",
      [](bool sabotage, std::uint64_t seed) {
        EquivalenceSpec spec;
        spec.sabotage = sabotage;
        spec.seed = seed;
        const EquivalenceResult r = backend_equivalence(spec);
        py::list cases;
        for (const auto& c : r.cases) {
          py::dict d;
          d["level"] = c.level;
          d["backend"] = std::string(to_string(c.backend));
          d["k"] = c.k;
          d["beta"] = c.beta;
          d["max_rel_error"] = c.max_rel_error;
          d["tolerance"] = c.tolerance;
          d["pass"] = c.pass;
          cases.append(d);
        }
        py::dict out;
        out["pass"] = r.pass;
        out["max_rel_error"] = r.max_rel_error;
        out["cases"] = cases;
        return out;
      },
      py::arg("sabotage") = false, py::arg("seed") = 0);

  m.def(
      "run_bench",
      [](Index T, std::vector<Index> sizes, std::vector<Index> folds, Index repeats, std::vector<std::string> backends) {
        BenchSpec spec;
        spec.T = T;
        spec.sizes = std::move(sizes);
        spec.folds = std::move(folds);
        spec.repeats = repeats;
        spec.backends.clear();
        for (const auto& b : backends) spec.backends.push_back(parse_backend(b));
        BenchTable table;
        {
          py::gil_scoped_release release;
          table = run_bench(spec);
        }
        py::list rows;
        for (const BenchRow& r : table) {
          py::dict d;
          d["backend"] = std::string(to_string(r.backend));
          d["n_r"] = r.n_r;
          d["k"] = r.k;
          d["phase"] = r.phase;
          d["mean_ms"] = r.mean_ms;
          d["min_ms"] = r.min_ms;
          rows.append(d);
        }
        return py::make_tuple(rows, to_python(to_json(check_scaling(table))));
      },
      py::arg("T") = 1260, py::arg("sizes") = std::vector<Index>{50, 500},
      py::arg("folds") = std::vector<Index>{2, 5, 10, 21, 63, 126, 252, 630, 1260}, py::arg("repeats") = 5,
      py::arg("backends") = std::vector<std::string>{"naive", "small_k", "large_k"},
      "Returns (rows, verdict).");

  m.def(
      "load_univariate_csv", [](const std::filesystem::path& p) { return load_univariate_csv(p).values; },
      py::arg("path"));

  m.def(
      "load_japanese_vowels",
      [](const std::filesystem::path& train, const std::filesystem::path& test) {
        SequenceDataset d = load_japanese_vowels(train, test);
        py::dict out;
        out["train_sequences"] = d.train_sequences;
        out["train_labels"] = d.train_labels;
        out["test_sequences"] = d.test_sequences;
        out["test_labels"] = d.test_labels;
        out["n_classes"] = d.n_classes;
        return out;
      },
      py::arg("train_path"), py::arg("test_path"));

  m.def(
      "run_experiment",
      [](const std::filesystem::path& config_path, bool force, unsigned jobs) {
        const ExperimentConfig c = load_experiment(config_path);
        std::ostringstream log;
        std::vector<SchemeOutcome> outcomes;
        {
          py::gil_scoped_release release;
          outcomes = run_experiment(c, {jobs, force}, log);
        }
        py::list out;
        for (const auto& o : outcomes) {
          py::dict d;
          d["scheme"] = describe(o.spec);
          d["report"] = o.report_path;
          d["ok"] = o.result.has_value();
          d["failure"] = o.failure;
          out.append(d);
        }
        return py::make_tuple(out, log.str());
      },
      py::arg("config_path"), py::arg("force") = false, py::arg("jobs") = 0,
      "Runs a JSON experiment config; returns (per-scheme outcomes, summary text).");
}
