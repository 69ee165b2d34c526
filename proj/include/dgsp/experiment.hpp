#pragma once

// Glue between the modules: frozen labeled bucket sets on disk, K-fold
// training/evaluation and baseline reports sharing the same fold split.

#include "dgsp/baselines.hpp"
#include "dgsp/model.hpp"
#include "dgsp/noise.hpp"
#include "dgsp/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace dgsp {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct PreparedSet {
  std::string dataset_path;
  std::shared_ptr<const TemporalGraphSignal> signal;
  int length = 10;
  int stride = 1;
  NoiseSpec noise;
  std::vector<LabeledBucket> buckets;
};

// Bucketize and inject noise with bounds over the entire signal.
PreparedSet prepare(std::shared_ptr<const TemporalGraphSignal> signal, int length, int stride,
                    const NoiseSpec& noise, std::string dataset_path = {});

nlohmann::json prepared_to_json(const PreparedSet& set);
// `signal` must be the dataset the set was prepared from.
PreparedSet prepared_from_json(const nlohmann::json& doc,
                               std::shared_ptr<const TemporalGraphSignal> signal);
void save_prepared(const PreparedSet& set, const std::filesystem::path& path);
// Loads the referenced dataset too; relative dataset paths resolve against
// the prepared file's directory.
PreparedSet load_prepared(const std::filesystem::path& path);

// Dataset, bucket and noise settings echoed into every report.
nlohmann::json data_echo(const PreparedSet& set);
nlohmann::json train_echo(const TrainConfig& config, const ModelConfig& model);

struct CrossValidation {
  std::vector<FoldSplit> splits;
  std::vector<TrainResult> models;
  MetricsReport report;
};

CrossValidation cross_validate(const PreparedSet& set, const TrainConfig& config,
                               const ModelConfig& model);

// Model report from one checkpoint per fold.
MetricsReport evaluate_folds(const PreparedSet& set, const std::vector<FoldSplit>& splits,
                             const std::vector<Checkpoint>& checkpoints);

MetricsReport baseline_report(const PreparedSet& set, const std::vector<FoldSplit>& splits,
                              BaselineMethod method, std::uint64_t seed);

}  // namespace dgsp
