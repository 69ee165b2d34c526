#include "dgsp/anomaly.hpp"
#include "dgsp/cli.hpp"
#include "dgsp/error.hpp"
#include "dgsp/experiment.hpp"
#include "dgsp/surrogate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace dgsp;

namespace {

using SignalPtr = std::shared_ptr<TemporalGraphSignal>;

// Reports cross the boundary as JSON text; the Python package parses them.
std::string dump(const nlohmann::json& doc) { return doc.dump(); }

TrainConfig make_train_config(int epochs, double lr, int folds, std::uint64_t seed, const std::string& optimizer,
                              int batch_size, const std::string& fold_mode, bool redraw_noise) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = lr;
  c.folds = folds;
  c.seed = seed;
  c.optimizer = parse_optimizer(optimizer);
  c.batch_size = batch_size;
  c.fold_mode = parse_fold_mode(fold_mode);
  c.redraw_noise = redraw_noise;
  return c;
}

ModelConfig make_model_config(const std::string& cell, int embed_dim, int attention_dim, int channels,
                              bool directed) {
  ModelConfig m;
  m.cell = parse_cell_kind(cell);
  m.embed_dim = embed_dim;
  m.attention_dim = attention_dim;
  m.input_channels = channels;
  m.symmetrize = !directed;
  m.validate();
  return m;
}

}  // namespace

PYBIND11_MODULE(_dgsp, m) {
  m.doc() = "Temporal graph similarity prediction core";
  m.attr("__version__") = kToolkitVersion;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<AdapterError>(m, "AdapterError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  py::class_<TemporalGraphSignal, SignalPtr>(m, "Signal")
      .def_property_readonly("name", [](const TemporalGraphSignal& s) { return s.name; })
      .def_property_readonly("num_nodes", [](const TemporalGraphSignal& s) { return s.num_nodes; })
      .def_property_readonly("num_snapshots", &TemporalGraphSignal::num_snapshots)
      .def_property_readonly("num_channels", &TemporalGraphSignal::num_channels)
      .def_property_readonly("frequency", [](const TemporalGraphSignal& s) { return s.frequency; })
      .def_property_readonly("edges",
                             [](const TemporalGraphSignal& s) {
                               std::vector<std::pair<int, int>> out;
                               for (const Edge& e : s.edges) out.emplace_back(e.src, e.dst);
                               return out;
                             })
      .def_property_readonly("weights", [](const TemporalGraphSignal& s) { return s.weights; })
      .def("snapshot", [](const TemporalGraphSignal& s, int t) -> Matrix { return s.features.at(t); },
           py::arg("t"), "N x F feature matrix of snapshot t")
      .def("to_json", [](const TemporalGraphSignal& s) { return dump(signal_to_json(s)); })
      .def("__repr__", [](const TemporalGraphSignal& s) {
        std::ostringstream os;
        os << "<Signal " << s.name << ": " << s.num_nodes << " nodes, " << s.edges.size() << " edges, "
           << s.num_snapshots() << " snapshots>";
        return os.str();
      });

  m.def(
      "load_canonical",
      [](const std::filesystem::path& path, bool strict) {
        return std::make_shared<TemporalGraphSignal>(load_canonical(path, {strict}));
      },
      py::arg("path"), py::arg("strict") = true);
  m.def(
      "signal_from_json",
      [](const std::string& text, bool strict) {
        return std::make_shared<TemporalGraphSignal>(signal_from_json(nlohmann::json::parse(text), {strict}));
      },
      py::arg("text"), py::arg("strict") = true);
  m.def(
      "write_canonical", [](const SignalPtr& s, const std::filesystem::path& path) { write_canonical(*s, path); },
      py::arg("signal"), py::arg("path"));
  m.def(
      "convert",
      [](const std::string& raw_json, const std::string& kind, bool require_reference_counts) {
        AdaptResult r = adapt_dataset(nlohmann::json::parse(raw_json), parse_dataset_kind(kind),
                                      require_reference_counts);
        return py::make_tuple(std::make_shared<TemporalGraphSignal>(std::move(r.signal)), r.warnings);
      },
      py::arg("raw_json"), py::arg("kind"), py::arg("require_reference_counts") = false,
      "Adapt a published raw dataset document; returns (signal, warnings)");
  m.def(
      "surrogate_raw",
      [](const std::string& kind, std::uint64_t seed) {
        return dump(surrogate::raw_document(parse_dataset_kind(kind), seed));
      },
      py::arg("kind"), py::arg("seed") = 0, "Synthetic raw document with the published counts");
  m.def(
      "normalized_adjacency", [](const SignalPtr& s, bool symmetrize) { return normalized_adjacency(*s, symmetrize); },
      py::arg("signal"), py::arg("symmetrize") = true);

  py::class_<PreparedSet>(m, "PreparedSet")
      .def_property_readonly("signal", [](const PreparedSet& p) { return std::const_pointer_cast<TemporalGraphSignal>(p.signal); })
      .def_property_readonly("length", [](const PreparedSet& p) { return p.length; })
      .def_property_readonly("stride", [](const PreparedSet& p) { return p.stride; })
      .def_property_readonly("labels",
                             [](const PreparedSet& p) {
                               std::vector<double> out;
                               for (const auto& b : p.buckets) out.push_back(b.label);
                               return out;
                             })
      .def_property_readonly("starts",
                             [](const PreparedSet& p) {
                               std::vector<int> out;
                               for (const auto& b : p.buckets) out.push_back(b.bucket.start);
                               return out;
                             })
      .def_property_readonly("perturbed_nodes",
                             [](const PreparedSet& p) {
                               std::vector<std::vector<int>> out;
                               for (const auto& b : p.buckets) out.push_back(b.perturbed_nodes);
                               return out;
                             })
      .def("candidate", [](const PreparedSet& p, std::size_t i) -> Matrix { return p.buckets.at(i).candidate; })
      .def("save", [](const PreparedSet& p, const std::filesystem::path& path) { save_prepared(p, path); })
      .def("__len__", [](const PreparedSet& p) { return p.buckets.size(); });

  m.def(
      "prepare",
      [](const SignalPtr& s, int length, int stride, double corrupt_probability, std::uint64_t seed) {
        return prepare(s, length, stride, {corrupt_probability, seed});
      },
      py::arg("signal"), py::arg("length") = 10, py::arg("stride") = 1, py::arg("corrupt_probability") = 0.5,
      py::arg("seed") = 0, "Bucketize and inject labeled noise");
  m.def("load_prepared", &load_prepared, py::arg("path"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_property_readonly("cell", [](const Checkpoint& c) { return std::string(to_string(c.config.cell)); })
      .def_property_readonly("final_train_loss", [](const Checkpoint& c) { return c.provenance.final_train_loss; })
      .def("parameter", [](const Checkpoint& c, const std::string& name) -> Matrix { return c.params[name].value(); })
      .def("parameter_names",
           [](const Checkpoint& c) {
             std::vector<std::string> out;
             for (const auto& [name, _] : c.params.named()) out.push_back(name);
             return out;
           })
      .def("save", [](const Checkpoint& c, const std::filesystem::path& path) { save_checkpoint(c, path); });
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "train",
      [](const PreparedSet& set, const std::string& cell, int epochs, double lr, std::uint64_t seed,
         const std::string& optimizer, int batch_size, int embed_dim, int attention_dim, bool redraw_noise,
         bool directed) {
        TrainConfig c = make_train_config(epochs, lr, 3, seed, optimizer, batch_size, "random", redraw_noise);
        c.bucket_length = set.length;
        c.noise = set.noise;
        const ModelConfig mc =
            make_model_config(cell, embed_dim, attention_dim, set.signal->num_channels(), directed);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(set.buckets, c, mc);
        }
        return py::make_tuple(r.checkpoint, r.loss_history);
      },
      py::arg("prepared"), py::arg("cell") = "A3TGCN", py::arg("epochs") = 30, py::arg("lr") = 0.01,
      py::arg("seed") = 0, py::arg("optimizer") = "adam", py::arg("batch_size") = 1, py::arg("embed_dim") = 32,
      py::arg("attention_dim") = 32, py::arg("redraw_noise") = false, py::arg("directed") = false,
      "Train on every bucket; returns (checkpoint, per-epoch loss)");

  m.def(
      "cross_validate_json",
      [](const PreparedSet& set, const std::string& cell, int epochs, double lr, int folds, std::uint64_t seed,
         const std::string& optimizer, int batch_size, const std::string& fold_mode, int embed_dim,
         int attention_dim, bool redraw_noise, bool directed) {
        TrainConfig c = make_train_config(epochs, lr, folds, seed, optimizer, batch_size, fold_mode, redraw_noise);
        c.bucket_length = set.length;
        const ModelConfig mc =
            make_model_config(cell, embed_dim, attention_dim, set.signal->num_channels(), directed);
        std::string out;
        {
          py::gil_scoped_release release;
          out = dump(cross_validate(set, c, mc).report.to_json());
        }
        return out;
      },
      py::arg("prepared"), py::arg("cell") = "A3TGCN", py::arg("epochs") = 30, py::arg("lr") = 0.01,
      py::arg("folds") = 3, py::arg("seed") = 0, py::arg("optimizer") = "adam", py::arg("batch_size") = 1,
      py::arg("fold_mode") = "random", py::arg("embed_dim") = 32, py::arg("attention_dim") = 32,
      py::arg("redraw_noise") = false, py::arg("directed") = false);

  m.def(
      "baseline_json",
      [](const PreparedSet& set, const std::string& method, int folds, std::uint64_t seed,
         const std::string& fold_mode) {
        const BaselineMethod bm = method == "random" ? BaselineMethod::Random
                                  : method == "tsr"  ? BaselineMethod::TimeSeriesRegression
                                                     : throw ConfigError("unknown baseline '" + method + "'");
        const auto splits = kfold_split(set.buckets.size(), folds, seed, parse_fold_mode(fold_mode));
        return dump(baseline_report(set, splits, bm, seed).to_json());
      },
      py::arg("prepared"), py::arg("method"), py::arg("folds") = 3, py::arg("seed") = 0,
      py::arg("fold_mode") = "random");

  m.def(
      "predict",
      [](const Checkpoint& ck, const PreparedSet& set) {
        const diff::Tensor adj = adjacency_tensor(*set.signal, ck.config);
        std::vector<double> out;
        for (const auto& b : set.buckets) out.push_back(forward(b, ck, &adj));
        return out;
      },
      py::arg("checkpoint"), py::arg("prepared"), "Score every bucket of a prepared set");
  m.def(
      "tsr_baseline",
      [](const PreparedSet& set) {
        std::vector<double> out;
        for (const auto& p : tsr_baseline(set.buckets)) out.push_back(p.value);
        return out;
      },
      py::arg("prepared"));

  m.def(
      "compute_metrics",
      [](const std::vector<double>& preds, const std::vector<double>& labels) {
        const Metrics x = compute_metrics(preds, labels);
        return py::make_tuple(x.mse, x.mae, x.rmse);
      },
      py::arg("predictions"), py::arg("labels"), "(MSE, MAE, RMSE)");
  m.def(
      "kfold_split",
      [](std::size_t count, int folds, std::uint64_t seed, const std::string& mode) {
        std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
        for (const FoldSplit& f : kfold_split(count, folds, seed, parse_fold_mode(mode))) out.emplace_back(f.train, f.test);
        return out;
      },
      py::arg("count"), py::arg("folds") = 3, py::arg("seed") = 0, py::arg("mode") = "random");

  m.def(
      "score_stream",
      [](const SignalPtr& s, const Checkpoint& ck, int length) { return score_stream(s, ck, length); },
      py::arg("signal"), py::arg("checkpoint"), py::arg("length") = 10);
  m.def(
      "detect_json",
      [](const std::vector<double>& scores, const std::string& policy, double tau, int window, double k,
         int first_index) {
        AlarmPolicy p;
        if (policy == "fixed") {
          p.mode = AlarmMode::FixedThreshold;
        } else if (policy != "zscore") {
          throw ConfigError("unknown policy '" + policy + "' (expected fixed or zscore)");
        }
        p.threshold = tau;
        p.window = window;
        p.multiplier = k;
        return dump(events_to_json(detect(scores, p, first_index).events));
      },
      py::arg("scores"), py::arg("policy") = "zscore", py::arg("tau") = 0.7, py::arg("window") = 20,
      py::arg("k") = 3.0, py::arg("first_index") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_command(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a CLI subcommand in-process; returns (exit code, stdout, stderr)");
}
