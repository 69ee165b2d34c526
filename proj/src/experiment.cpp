#include "dgsp/experiment.hpp"

#include "dgsp/error.hpp"

#include <fstream>

namespace dgsp {

using nlohmann::json;

PreparedSet prepare(std::shared_ptr<const TemporalGraphSignal> signal, int length, int stride,
                    const NoiseSpec& noise, std::string dataset_path) {
  PreparedSet set;
  set.dataset_path = std::move(dataset_path);
  set.length = length;
  set.stride = stride;
  set.noise = noise;
  const std::vector<Bucket> buckets = bucketize(signal, length, stride);
  set.buckets = inject_noise(buckets, node_bounds(*signal), noise);
  set.signal = std::move(signal);
  return set;
}

json prepared_to_json(const PreparedSet& set) {
  json doc;
  doc["format"] = "dgsp-prepared";
  doc["dataset"] = set.signal->name;
  doc["dataset_path"] = set.dataset_path;
  doc["num_nodes"] = set.signal->num_nodes;
  doc["num_snapshots"] = set.signal->num_snapshots();
  doc["length"] = set.length;
  doc["stride"] = set.stride;
  doc["noise"] = {{"corrupt_probability", set.noise.corrupt_probability}, {"seed", set.noise.seed}};
  json buckets = json::array();
  for (const LabeledBucket& lb : set.buckets) {
    json cand = json::array();
    for (Index v = 0; v < lb.candidate.rows(); ++v) {
      cand.push_back(std::vector<double>(lb.candidate.row(v).data(),
                                         lb.candidate.row(v).data() + lb.candidate.cols()));
    }
    buckets.push_back({{"dataset", set.signal->name},
                       {"start", lb.bucket.start},
                       {"label", lb.label},
                       {"perturbed_nodes", lb.perturbed_nodes},
                       {"candidate", std::move(cand)}});
  }
  doc["buckets"] = std::move(buckets);
  return doc;
}

PreparedSet prepared_from_json(const json& doc, std::shared_ptr<const TemporalGraphSignal> signal) {
  try {
    if (doc.value("format", "") != "dgsp-prepared") throw ParseError("prepared set: bad format tag");
    PreparedSet set;
    set.dataset_path = doc.at("dataset_path").get<std::string>();
    set.length = doc.at("length").get<int>();
    set.stride = doc.at("stride").get<int>();
    set.noise.corrupt_probability = doc.at("noise").at("corrupt_probability").get<double>();
    set.noise.seed = doc.at("noise").at("seed").get<std::uint64_t>();
    if (doc.at("num_nodes").get<int>() != signal->num_nodes ||
        doc.at("num_snapshots").get<int>() != signal->num_snapshots() ||
        doc.at("dataset").get<std::string>() != signal->name) {
      throw ParseError("prepared set: dataset does not match the one it was prepared from");
    }
    const int n = signal->num_nodes;
    const Index f = signal->num_channels();
    for (const json& b : doc.at("buckets")) {
      const int start = b.at("start").get<int>();
      if (start < 0 || start + set.length > signal->num_snapshots()) {
        throw ParseError("prepared set: bucket start " + std::to_string(start) + " out of range");
      }
      LabeledBucket lb;
      lb.bucket = Bucket{signal, start, set.length};
      lb.label = b.at("label").get<double>();
      lb.perturbed_nodes = b.at("perturbed_nodes").get<std::vector<int>>();
      const json& cand = b.at("candidate");
      if (cand.size() != static_cast<std::size_t>(n)) throw ParseError("prepared set: ragged candidate");
      lb.candidate.resize(n, f);
      for (int v = 0; v < n; ++v) {
        if (cand[v].size() != static_cast<std::size_t>(f)) throw ParseError("prepared set: ragged candidate");
        for (Index c = 0; c < f; ++c) lb.candidate(v, c) = cand[v][c].get<double>();
      }
      set.buckets.push_back(std::move(lb));
    }
    set.signal = std::move(signal);
    return set;
  } catch (const json::exception& e) {
    throw ParseError(std::string("prepared set: ") + e.what());
  }
}

void save_prepared(const PreparedSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path.string() + ": cannot write");
  out << prepared_to_json(set).dump() << '\n';
}

PreparedSet load_prepared(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::filesystem::path dataset = doc.value("dataset_path", "");
  if (dataset.empty()) throw ParseError(path.string() + ": missing dataset_path");
  if (dataset.is_relative()) dataset = path.parent_path() / dataset;
  auto signal = std::make_shared<const TemporalGraphSignal>(load_canonical(dataset));
  return prepared_from_json(doc, std::move(signal));
}

json data_echo(const PreparedSet& set) {
  return {{"dataset", set.signal->name},
          {"num_nodes", set.signal->num_nodes},
          {"num_snapshots", set.signal->num_snapshots()},
          {"length", set.length},
          {"stride", set.stride},
          {"noise", {{"corrupt_probability", set.noise.corrupt_probability}, {"seed", set.noise.seed}}},
          {"buckets", set.buckets.size()},
          {"toolkit_version", kToolkitVersion}};
}

json train_echo(const TrainConfig& c, const ModelConfig& m) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"folds", c.folds},
          {"seed", c.seed},
          {"optimizer", to_string(c.optimizer)},
          {"batch_size", c.batch_size},
          {"fold_mode", to_string(c.fold_mode)},
          {"redraw_noise", c.redraw_noise},
          {"cell", to_string(m.cell)},
          {"embed_dim", m.embed_dim},
          {"attention_dim", m.attention_dim},
          {"symmetrize", m.symmetrize}};
}

CrossValidation cross_validate(const PreparedSet& set, const TrainConfig& config,
                               const ModelConfig& model) {
  config.validate();
  CrossValidation cv;
  cv.splits = kfold_split(set.buckets.size(), config.folds, config.seed, config.fold_mode);
  std::vector<Checkpoint> checkpoints;
  for (std::size_t f = 0; f < cv.splits.size(); ++f) {
    TrainConfig fold_config = config;
    fold_config.noise = set.noise;
    TrainResult trained = train(gather(set.buckets, cv.splits[f].train), fold_config, model);
    trained.checkpoint.provenance.fold = static_cast<int>(f);
    trained.checkpoint.provenance.folds = config.folds;
    trained.checkpoint.provenance.split_seed = config.seed;
    trained.checkpoint.provenance.fold_mode = std::string(to_string(config.fold_mode));
    checkpoints.push_back(trained.checkpoint);
    cv.models.push_back(std::move(trained));
  }
  cv.report = evaluate_folds(set, cv.splits, checkpoints);
  cv.report.config["train"] = train_echo(config, model);
  return cv;
}

MetricsReport evaluate_folds(const PreparedSet& set, const std::vector<FoldSplit>& splits,
                             const std::vector<Checkpoint>& checkpoints) {
  if (splits.size() != checkpoints.size()) {
    throw ConfigError("evaluate: " + std::to_string(checkpoints.size()) + " checkpoints for " +
                      std::to_string(splits.size()) + " folds");
  }
  MetricsReport report;
  report.dataset = set.signal->name;
  report.method = "DGSP-GCN";
  report.cell = checkpoints.empty() ? "-" : std::string(to_string(checkpoints.front().config.cell));
  report.config = {{"data", data_echo(set)}};
  for (std::size_t f = 0; f < splits.size(); ++f) {
    report.folds.push_back(evaluate(checkpoints[f], gather(set.buckets, splits[f].test),
                                    &report.predictions, static_cast<int>(f)));
  }
  report.finalize();
  return report;
}

MetricsReport baseline_report(const PreparedSet& set, const std::vector<FoldSplit>& splits,
                              BaselineMethod method, std::uint64_t seed) {
  MetricsReport report;
  report.dataset = set.signal->name;
  report.method = std::string(to_string(method));
  report.cell = "-";
  report.config = {{"data", data_echo(set)}, {"baseline", {{"method", to_string(method)}, {"seed", seed}}}};
  for (std::size_t f = 0; f < splits.size(); ++f) {
    const std::vector<LabeledBucket> test = gather(set.buckets, splits[f].test);
    const std::vector<BaselinePrediction> preds =
        method == BaselineMethod::Random ? random_baseline(test, derive_seed(seed, 100 + f))
                                         : tsr_baseline(test);
    std::vector<double> yhat;
    std::vector<double> labels;
    for (std::size_t i = 0; i < test.size(); ++i) {
      yhat.push_back(preds[i].value);
      labels.push_back(test[i].label);
      report.predictions.push_back({static_cast<int>(f), test[i].bucket.start, test[i].label, preds[i].value});
    }
    FoldReport fr;
    fr.metrics = compute_metrics(yhat, labels);
    fr.samples = test.size();
    report.folds.push_back(fr);
  }
  report.finalize();
  return report;
}

}  // namespace dgsp
