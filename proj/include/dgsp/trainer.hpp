#pragma once

#include "dgsp/model.hpp"
#include "dgsp/noise.hpp"

#include "json.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dgsp {

enum class OptimizerKind { Sgd, Adam };
enum class FoldMode { Random, Contiguous };

OptimizerKind parse_optimizer(std::string_view text);
std::string_view to_string(OptimizerKind kind);
FoldMode parse_fold_mode(std::string_view text);
std::string_view to_string(FoldMode mode);

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 0.01;
  int bucket_length = 10;
  int folds = 3;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 1;
  FoldMode fold_mode = FoldMode::Random;
  // Re-draw candidate noise every epoch instead of reusing the frozen set.
  bool redraw_noise = false;
  NoiseSpec noise;  // used only when redraw_noise is set

  void validate() const;
};

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

Metrics compute_metrics(std::span<const double> predictions, std::span<const double> labels);

struct FoldSplit {
  std::vector<std::size_t> train;  // indices into the bucket list
  std::vector<std::size_t> test;
};

// Seeded shuffle (Random mode) then K near-equal contiguous chunks; the first
// (n mod K) chunks are one larger. Fold i tests on chunk i.
std::vector<FoldSplit> kfold_split(std::size_t count, int folds, std::uint64_t seed,
                                   FoldMode mode = FoldMode::Random);

template <typename T>
std::vector<T> gather(const std::vector<T>& items, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items.at(i));
  return out;
}

// Bounds over every snapshot touched by the buckets (clean source values).
NodeBounds training_bounds(std::span<const LabeledBucket> buckets);

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const ModelParams& params);
  // Applies one update from the current grads.
  void step();

 private:
  TrainConfig config_;
  std::vector<diff::Tensor> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long t_ = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_history;  // mean squared error per epoch
};

TrainResult train(const std::vector<LabeledBucket>& train_set, const TrainConfig& config,
                  const ModelConfig& model_config);

// Trains from the given starting checkpoint (its params are copied).
TrainResult train_from(const std::vector<LabeledBucket>& train_set, const TrainConfig& config,
                       Checkpoint start);

struct Prediction {
  int fold = 0;
  int start = 0;
  double label = 0.0;
  double prediction = 0.0;
};

struct FoldReport {
  Metrics metrics;
  std::size_t samples = 0;
  std::size_t out_of_range_inputs = 0;  // scaled inputs outside [-1, 1]
};

struct MetricsReport {
  std::string dataset;
  std::string method;  // "DGSP-GCN", "random", "tsr"
  std::string cell;    // recurrent layer, "-" for baselines
  nlohmann::json config;
  std::vector<FoldReport> folds;
  Metrics mean;
  std::vector<Prediction> predictions;

  void finalize();  // recomputes `mean` from folds
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& doc);
  // One row per fold plus a "mean" row.
  std::string to_csv() const;
};

FoldReport evaluate(const Checkpoint& checkpoint, const std::vector<LabeledBucket>& test_set,
                    std::vector<Prediction>* predictions = nullptr, int fold = 0);

}  // namespace dgsp
