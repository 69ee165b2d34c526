#include "dgsp/trainer.hpp"

#include "dgsp/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

namespace dgsp {

using diff::Tensor;
using nlohmann::json;

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected adam or sgd)");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

FoldMode parse_fold_mode(std::string_view text) {
  if (text == "random") return FoldMode::Random;
  if (text == "contiguous") return FoldMode::Contiguous;
  throw ConfigError("unknown fold mode '" + std::string(text) + "' (expected random or contiguous)");
}

std::string_view to_string(FoldMode mode) {
  return mode == FoldMode::Random ? "random" : "contiguous";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (folds < 2) throw ConfigError("K must be >= 2");
  if (bucket_length < 2) throw ConfigError("bucket length must be >= 2");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

Metrics compute_metrics(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw ContractError("compute_metrics: " + std::to_string(predictions.size()) +
                        " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ContractError("compute_metrics: empty input");
  double sq = 0.0;
  double abs = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double e = labels[i] - predictions[i];
    sq += e * e;
    abs += std::abs(e);
  }
  const double n = static_cast<double>(labels.size());
  Metrics m;
  m.mse = sq / n;
  m.mae = abs / n;
  m.rmse = std::sqrt(m.mse);
  return m;
}

std::vector<FoldSplit> kfold_split(std::size_t count, int folds, std::uint64_t seed, FoldMode mode) {
  if (folds < 2) throw ContractError("kfold_split: K must be >= 2");
  if (static_cast<std::size_t>(folds) > count) {
    throw ContractError("kfold_split: K=" + std::to_string(folds) + " exceeds bucket count " +
                        std::to_string(count));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  if (mode == FoldMode::Random) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = count; i > 1; --i) {
      std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    }
  }
  const std::size_t k = static_cast<std::size_t>(folds);
  std::vector<std::size_t> bounds{0};
  for (std::size_t i = 0; i < k; ++i) {
    bounds.push_back(bounds.back() + count / k + (i < count % k ? 1 : 0));
  }
  std::vector<FoldSplit> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t j = 0; j < count; ++j) {
      auto& dst = (j >= bounds[f] && j < bounds[f + 1]) ? out[f].test : out[f].train;
      dst.push_back(order[j]);
    }
  }
  return out;
}

NodeBounds training_bounds(std::span<const LabeledBucket> buckets) {
  if (buckets.empty()) throw ContractError("training_bounds: no buckets");
  std::optional<NodeBounds> acc;
  for (const LabeledBucket& lb : buckets) {
    const Bucket& b = lb.bucket;
    NodeBounds nb = node_bounds(*b.signal, {b.start, b.start + b.length});
    if (acc) {
      acc->merge(nb);
    } else {
      acc = std::move(nb);
    }
  }
  return *acc;
}

Optimizer::Optimizer(const TrainConfig& config, const ModelParams& params)
    : config_(config), params_(params.tensors()) {
  for (const Tensor& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Optimizer::step() {
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::Sgd) {
    for (Tensor& p : params_) p.mutable_value() -= lr * p.grad();
    return;
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Matrix& g = params_[i].grad();
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    params_[i].mutable_value().array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.adam_epsilon);
  }
}

namespace {

struct PreparedSample {
  std::vector<Matrix> inputs;
  double label;
  int start;
};

void check_consistent(const std::vector<LabeledBucket>& set, const ModelConfig& mc) {
  if (set.empty()) throw ContractError("train: empty training set");
  const auto& first = *set.front().bucket.signal;
  for (const LabeledBucket& lb : set) {
    const auto& s = *lb.bucket.signal;
    if (s.num_nodes != first.num_nodes || s.num_channels() != first.num_channels()) {
      throw ConfigError("train: buckets disagree on node or channel count");
    }
  }
  if (first.num_channels() != mc.input_channels) {
    throw ConfigError("train: data has " + std::to_string(first.num_channels()) +
                      " channels, model expects " + std::to_string(mc.input_channels));
  }
}

}  // namespace

TrainResult train(const std::vector<LabeledBucket>& train_set, const TrainConfig& config,
                  const ModelConfig& model_config) {
  config.validate();
  check_consistent(train_set, model_config);
  Checkpoint start;
  start.config = model_config;
  start.params = ModelParams::glorot(model_config, derive_seed(config.seed, 0));
  start.input_bounds = training_bounds(train_set);
  return train_from(train_set, config, std::move(start));
}

TrainResult train_from(const std::vector<LabeledBucket>& train_set, const TrainConfig& config,
                       Checkpoint start) {
  config.validate();
  check_consistent(train_set, start.config);

  Checkpoint ck = std::move(start);
  ck.params = ck.params.clone();
  ck.params.set_requires_grad(true);
  ck.params.zero_grad();
  ck.provenance.dataset = train_set.front().bucket.signal->name;
  ck.provenance.seed = config.seed;
  ck.provenance.epochs = config.epochs;

  std::map<const TemporalGraphSignal*, Tensor> adjacency;
  for (const LabeledBucket& lb : train_set) {
    const auto* sig = lb.bucket.signal.get();
    if (!adjacency.contains(sig)) adjacency.emplace(sig, adjacency_tensor(*sig, ck.config));
  }

  std::vector<LabeledBucket> current = train_set;
  std::optional<NodeBounds> noise_bounds;
  if (config.redraw_noise) noise_bounds = node_bounds(*train_set.front().bucket.signal);

  auto prepare = [&](const std::vector<LabeledBucket>& set) {
    std::vector<PreparedSample> out;
    out.reserve(set.size());
    for (const LabeledBucket& lb : set) out.push_back({model_inputs(lb, ck), lb.label, lb.bucket.start});
    return out;
  };
  std::vector<PreparedSample> samples = prepare(current);

  Optimizer optimizer(config, ck.params);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.redraw_noise && epoch > 0) {
      std::vector<Bucket> plain;
      plain.reserve(current.size());
      for (const LabeledBucket& lb : current) plain.push_back(lb.bucket);
      NoiseSpec spec = config.noise;
      spec.seed = derive_seed(config.noise.seed, 1000 + static_cast<std::uint64_t>(epoch));
      current = inject_noise(plain, *noise_bounds, spec);
      samples = prepare(current);
    }
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(shuffle_rng)]);
    }

    double epoch_loss = 0.0;
    int in_batch = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const std::size_t idx = order[pos];
      const PreparedSample& s = samples[idx];
      const Tensor& adj = adjacency.at(current[idx].bucket.signal.get());
      diff::Tape tape;
      double loss_value = 0.0;
      {
        diff::TapeScope scope(tape);
        Tensor yhat = forward(ck.config, ck.params, s.inputs, adj);
        Tensor err = diff::subtract(yhat, Tensor::scalar(s.label));
        Tensor loss = diff::square(err);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
          throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                              ", bucket starting at snapshot " + std::to_string(s.start));
        }
        Tensor scaled = config.batch_size == 1 ? loss : diff::scale(loss, 1.0 / config.batch_size);
        tape.backward(scaled);
      }
      epoch_loss += loss_value;
      if (++in_batch == config.batch_size || pos + 1 == order.size()) {
        optimizer.step();
        ck.params.zero_grad();
        in_batch = 0;
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  ck.provenance.final_train_loss = result.loss_history.back();
  result.checkpoint = std::move(ck);
  return result;
}

FoldReport evaluate(const Checkpoint& checkpoint, const std::vector<LabeledBucket>& test_set,
                    std::vector<Prediction>* predictions, int fold) {
  if (test_set.empty()) throw ContractError("evaluate: empty test set");
  std::map<const TemporalGraphSignal*, Tensor> adjacency;
  std::vector<double> preds;
  std::vector<double> labels;
  FoldReport report;
  for (const LabeledBucket& lb : test_set) {
    const auto* sig = lb.bucket.signal.get();
    auto it = adjacency.find(sig);
    if (it == adjacency.end()) it = adjacency.emplace(sig, adjacency_tensor(*sig, checkpoint.config)).first;
    const double y = forward(lb, checkpoint, &it->second);
    preds.push_back(y);
    labels.push_back(lb.label);
    if (checkpoint.input_bounds) {
      for (const Matrix& x : model_inputs(lb, checkpoint)) {
        report.out_of_range_inputs +=
            static_cast<std::size_t>((x.array() < -1.0 || x.array() > 1.0).count());
      }
    }
    if (predictions) predictions->push_back({fold, lb.bucket.start, lb.label, y});
  }
  report.metrics = compute_metrics(preds, labels);
  report.samples = preds.size();
  return report;
}

void MetricsReport::finalize() {
  mean = {};
  if (folds.empty()) return;
  for (const FoldReport& f : folds) {
    mean.mse += f.metrics.mse;
    mean.mae += f.metrics.mae;
    mean.rmse += f.metrics.rmse;
  }
  const double k = static_cast<double>(folds.size());
  mean.mse /= k;
  mean.mae /= k;
  mean.rmse /= k;
}

json MetricsReport::to_json() const {
  json doc;
  doc["dataset"] = dataset;
  doc["method"] = method;
  doc["cell"] = cell;
  doc["config"] = config;
  json fs = json::array();
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const FoldReport& f = folds[i];
    fs.push_back({{"fold", i},
                  {"samples", f.samples},
                  {"mse", f.metrics.mse},
                  {"mae", f.metrics.mae},
                  {"rmse", f.metrics.rmse},
                  {"out_of_range_inputs", f.out_of_range_inputs}});
  }
  doc["folds"] = std::move(fs);
  doc["mean"] = {{"mse", mean.mse}, {"mae", mean.mae}, {"rmse", mean.rmse}};
  json ps = json::array();
  for (const Prediction& p : predictions) {
    ps.push_back({{"fold", p.fold}, {"start", p.start}, {"label", p.label}, {"prediction", p.prediction}});
  }
  doc["predictions"] = std::move(ps);
  return doc;
}

MetricsReport MetricsReport::from_json(const json& doc) {
  try {
    MetricsReport r;
    r.dataset = doc.at("dataset").get<std::string>();
    r.method = doc.at("method").get<std::string>();
    r.cell = doc.at("cell").get<std::string>();
    r.config = doc.at("config");
    for (const json& f : doc.at("folds")) {
      FoldReport fr;
      fr.samples = f.at("samples").get<std::size_t>();
      fr.metrics = {f.at("mse").get<double>(), f.at("mae").get<double>(), f.at("rmse").get<double>()};
      fr.out_of_range_inputs = f.value("out_of_range_inputs", std::size_t{0});
      r.folds.push_back(fr);
    }
    const json& m = doc.at("mean");
    r.mean = {m.at("mse").get<double>(), m.at("mae").get<double>(), m.at("rmse").get<double>()};
    for (const json& p : doc.at("predictions")) {
      r.predictions.push_back({p.at("fold").get<int>(), p.at("start").get<int>(),
                               p.at("label").get<double>(), p.at("prediction").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics report: ") + e.what());
  }
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "dataset,method,recurrent_layer,fold,samples,mse,mae,rmse\n";
  std::size_t total = 0;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const FoldReport& f = folds[i];
    total += f.samples;
    os << dataset << ',' << method << ',' << cell << ',' << i << ',' << f.samples << ','
       << f.metrics.mse << ',' << f.metrics.mae << ',' << f.metrics.rmse << '\n';
  }
  os << dataset << ',' << method << ',' << cell << ",mean," << total << ',' << mean.mse << ','
     << mean.mae << ',' << mean.rmse << '\n';
  return os.str();
}

}  // namespace dgsp
