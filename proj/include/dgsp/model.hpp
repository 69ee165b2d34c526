#pragma once

// Similarity model: per-snapshot graph convolution, a recurrent graph cell
// over the bucket, node mean pooling and a dense head with logistic output.

#include "dgsp/noise.hpp"
#include "dgsp/tensor.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dgsp {

enum class CellKind { GConvGRU, TGCN, A3TGCN };

CellKind parse_cell_kind(std::string_view text);
std::string_view to_string(CellKind kind);

struct ModelConfig {
  static constexpr std::array<int, 3> kHeadWidths{32, 64, 1};

  CellKind cell = CellKind::A3TGCN;
  int embed_dim = 32;
  int input_channels = 1;
  int attention_dim = 32;
  bool symmetrize = true;  // how the adjacency is built from the signal's edges

  void validate() const;
};

struct ParamShape {
  std::string name;
  Index rows;
  Index cols;
};

// Ordered parameter layout for a configuration.
std::vector<ParamShape> parameter_shapes(const ModelConfig& config);

class ModelParams {
 public:
  ModelParams() = default;

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static ModelParams glorot(const ModelConfig& config, std::uint64_t seed);
  static ModelParams zeros(const ModelConfig& config);

  const diff::Tensor& operator[](std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::pair<std::string, diff::Tensor>>& named() const { return entries_; }
  std::vector<diff::Tensor> tensors() const;

  // Copies values into fresh tensors (no aliasing with this instance).
  ModelParams clone() const;
  void set_requires_grad(bool on);
  void zero_grad();

  void add(std::string name, diff::Tensor tensor);

 private:
  std::vector<std::pair<std::string, diff::Tensor>> entries_;
};

struct Provenance {
  std::string dataset;
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_train_loss = 0.0;
  int fold = -1;
  int folds = 0;
  std::uint64_t split_seed = 0;
  std::string fold_mode = "random";
};

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  // Raw features are mapped so that these bounds land on [-1, 1]; absent
  // means the raw features are used as is.
  std::optional<NodeBounds> input_bounds;
  Provenance provenance;
};

nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// relu(A X W_in + b_in)
diff::Tensor gcn_embed(const diff::Tensor& features, const diff::Tensor& adjacency,
                       const ModelParams& params);

// One recurrent step. A3TGCN runs the TGCN step.
diff::Tensor cell_step(CellKind kind, const diff::Tensor& embedded, const diff::Tensor& previous,
                       const diff::Tensor& adjacency, const ModelParams& params);

struct AttentionOutput {
  diff::Tensor context;  // N x d
  diff::Tensor weights;  // N x L, each row sums to 1
};

AttentionOutput temporal_attention(std::span<const diff::Tensor> states, const ModelParams& params);

// Full forward pass on already scaled snapshots; returns a 1x1 score tensor.
diff::Tensor forward(const ModelConfig& config, const ModelParams& params,
                     std::span<const Matrix> snapshots, const diff::Tensor& adjacency);

// Snapshots of a bucket after the checkpoint's input scaling.
std::vector<Matrix> model_inputs(const LabeledBucket& bucket, const Checkpoint& checkpoint);

diff::Tensor adjacency_tensor(const TemporalGraphSignal& signal, const ModelConfig& config);

// Scalar score in (0, 1). Pass a precomputed adjacency to skip rebuilding it.
double forward(const LabeledBucket& bucket, const Checkpoint& checkpoint,
               const diff::Tensor* adjacency = nullptr);
double forward(const Bucket& bucket, const Checkpoint& checkpoint,
               const diff::Tensor* adjacency = nullptr);

}  // namespace dgsp
