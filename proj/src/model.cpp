#include "dgsp/model.hpp"

#include "dgsp/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>

namespace dgsp {

using diff::Tensor;
using nlohmann::json;

CellKind parse_cell_kind(std::string_view text) {
  std::string key(text);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (key == "GCONVGRU") return CellKind::GConvGRU;
  if (key == "TGCN") return CellKind::TGCN;
  if (key == "A3TGCN") return CellKind::A3TGCN;
  throw ConfigError("unknown cell kind '" + std::string(text) +
                    "' (expected GConvGRU, TGCN or A3TGCN)");
}

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::GConvGRU: return "GConvGRU";
    case CellKind::TGCN: return "TGCN";
    case CellKind::A3TGCN: return "A3TGCN";
  }
  return "unknown";
}

void ModelConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (attention_dim < 1) throw ConfigError("attention_dim must be >= 1");
}

std::vector<ParamShape> parameter_shapes(const ModelConfig& config) {
  config.validate();
  const Index f = config.input_channels;
  const Index d = config.embed_dim;
  std::vector<ParamShape> shapes{{"gcn.W", f, d}, {"gcn.b", 1, d}};
  switch (config.cell) {
    case CellKind::GConvGRU:
      for (const char* gate : {"z", "r", "h"}) {
        shapes.push_back({std::string("gru.W_") + gate, d, d});
        shapes.push_back({std::string("gru.U_") + gate, d, d});
        shapes.push_back({std::string("gru.b_") + gate, 1, d});
      }
      break;
    case CellKind::TGCN:
    case CellKind::A3TGCN:
      shapes.push_back({"tgcn.W_g", d, d});
      for (const char* gate : {"u", "r", "c"}) {
        shapes.push_back({std::string("tgcn.W_") + gate, 2 * d, d});
        shapes.push_back({std::string("tgcn.b_") + gate, 1, d});
      }
      break;
  }
  if (config.cell == CellKind::A3TGCN) {
    const Index a = config.attention_dim;
    shapes.push_back({"att.W_a", d, a});
    shapes.push_back({"att.b_a", 1, a});
    shapes.push_back({"att.v_a", a, 1});
  }
  const auto& w = ModelConfig::kHeadWidths;
  shapes.push_back({"head.W1", d, w[0]});
  shapes.push_back({"head.b1", 1, w[0]});
  shapes.push_back({"head.W2", w[0], w[1]});
  shapes.push_back({"head.b2", 1, w[1]});
  shapes.push_back({"head.W3", w[1], w[2]});
  shapes.push_back({"head.b3", 1, w[2]});
  return shapes;
}

namespace {

bool is_bias(const ParamShape& s) {
  auto dot = s.name.find('.');
  return s.name.compare(dot + 1, 1, "b") == 0;
}

}  // namespace

ModelParams ModelParams::glorot(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams p;
  for (const ParamShape& s : parameter_shapes(config)) {
    Matrix m = Matrix::Zero(s.rows, s.cols);
    if (!is_bias(s)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    }
    p.add(s.name, Tensor(std::move(m), true));
  }
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  ModelParams p;
  for (const ParamShape& s : parameter_shapes(config)) {
    p.add(s.name, Tensor::zeros(s.rows, s.cols, true));
  }
  return p;
}

void ModelParams::add(std::string name, Tensor tensor) {
  entries_.emplace_back(std::move(name), std::move(tensor));
}

const Tensor& ModelParams::operator[](std::string_view name) const {
  for (const auto& [key, t] : entries_) {
    if (key == name) return t;
  }
  throw ConfigError("model parameter '" + std::string(name) + "' not present for this cell");
}

bool ModelParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  for (const auto& [key, t] : entries_) p.add(key, Tensor(t.value(), t.requires_grad()));
  return p;
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& e : entries_) e.second.set_requires_grad(on);
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty() || !rows.front().is_array()) {
    throw ParseError(where + ": expected a non-empty 2-D array");
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r) {
    if (rows[r].size() != static_cast<std::size_t>(m.cols())) throw ParseError(where + ": ragged");
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ck) {
  json doc;
  doc["format"] = "dgsp-checkpoint";
  doc["format_version"] = 1;
  doc["config"] = {{"cell", to_string(ck.config.cell)},
                   {"embed_dim", ck.config.embed_dim},
                   {"input_channels", ck.config.input_channels},
                   {"attention_dim", ck.config.attention_dim},
                   {"symmetrize", ck.config.symmetrize},
                   {"head_widths", ModelConfig::kHeadWidths}};
  json params = json::array();
  for (const auto& [name, t] : ck.params.named()) {
    const Matrix& v = t.value();
    params.push_back({{"name", name},
                      {"rows", v.rows()},
                      {"cols", v.cols()},
                      {"values", std::vector<double>(v.data(), v.data() + v.size())}});
  }
  doc["params"] = std::move(params);
  if (ck.input_bounds) {
    doc["input_bounds"] = {{"min", matrix_to_json(ck.input_bounds->min)},
                           {"max", matrix_to_json(ck.input_bounds->max)}};
  } else {
    doc["input_bounds"] = nullptr;
  }
  const Provenance& p = ck.provenance;
  doc["provenance"] = {{"dataset", p.dataset},   {"seed", p.seed},
                       {"epochs", p.epochs},     {"final_train_loss", p.final_train_loss},
                       {"fold", p.fold},         {"folds", p.folds},
                       {"split_seed", p.split_seed}, {"fold_mode", p.fold_mode}};
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "dgsp-checkpoint") throw ParseError("checkpoint: bad format tag");
    Checkpoint ck;
    const json& c = doc.at("config");
    ck.config.cell = parse_cell_kind(c.at("cell").get<std::string>());
    ck.config.embed_dim = c.at("embed_dim").get<int>();
    ck.config.input_channels = c.at("input_channels").get<int>();
    ck.config.attention_dim = c.at("attention_dim").get<int>();
    ck.config.symmetrize = c.at("symmetrize").get<bool>();
    if (c.at("head_widths").get<std::vector<int>>() !=
        std::vector<int>(ModelConfig::kHeadWidths.begin(), ModelConfig::kHeadWidths.end())) {
      throw ParseError("checkpoint: head widths must be 32, 64, 1");
    }

    const auto shapes = parameter_shapes(ck.config);
    const json& params = doc.at("params");
    if (params.size() != shapes.size()) {
      throw ParseError("checkpoint: expected " + std::to_string(shapes.size()) + " parameters, got " +
                       std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const json& p = params[i];
      const ParamShape& s = shapes[i];
      if (p.at("name").get<std::string>() != s.name || p.at("rows").get<Index>() != s.rows ||
          p.at("cols").get<Index>() != s.cols) {
        throw ParseError("checkpoint: parameter " + std::to_string(i) + " should be " + s.name +
                         " (" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")");
      }
      auto values = p.at("values").get<std::vector<double>>();
      if (values.size() != static_cast<std::size_t>(s.rows * s.cols)) {
        throw ParseError("checkpoint: " + s.name + " has wrong value count");
      }
      Matrix m = Eigen::Map<const Matrix>(values.data(), s.rows, s.cols);
      if (!m.allFinite()) throw ParseError("checkpoint: " + s.name + " has non-finite values");
      ck.params.add(s.name, Tensor(std::move(m), true));
    }

    if (const json& b = doc.at("input_bounds"); !b.is_null()) {
      ck.input_bounds = NodeBounds{matrix_from_json(b.at("min"), "input_bounds.min"),
                                   matrix_from_json(b.at("max"), "input_bounds.max")};
      if (ck.input_bounds->min.cols() != ck.config.input_channels ||
          ck.input_bounds->max.rows() != ck.input_bounds->min.rows() ||
          ck.input_bounds->max.cols() != ck.input_bounds->min.cols()) {
        throw ParseError("checkpoint: input_bounds shape inconsistent with config");
      }
    }
    const json& p = doc.at("provenance");
    ck.provenance.dataset = p.at("dataset").get<std::string>();
    ck.provenance.seed = p.at("seed").get<std::uint64_t>();
    ck.provenance.epochs = p.at("epochs").get<int>();
    ck.provenance.final_train_loss = p.at("final_train_loss").get<double>();
    ck.provenance.fold = p.at("fold").get<int>();
    ck.provenance.folds = p.at("folds").get<int>();
    ck.provenance.split_seed = p.at("split_seed").get<std::uint64_t>();
    ck.provenance.fold_mode = p.at("fold_mode").get<std::string>();
    return ck;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path.string() + ": cannot write");
  out << checkpoint_to_json(checkpoint).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Forward pass

Tensor gcn_embed(const Tensor& features, const Tensor& adjacency, const ModelParams& params) {
  using namespace diff;
  return relu(add(matmul(matmul(adjacency, features), params["gcn.W"]), params["gcn.b"]));
}

namespace {

Tensor one_minus(const Tensor& x) {
  return diff::subtract(Tensor::filled(x.rows(), x.cols(), 1.0), x);
}

Tensor gconvgru_step(const Tensor& x, const Tensor& h, const Tensor& adj, const ModelParams& p) {
  using namespace diff;
  Tensor ax = matmul(adj, x);
  Tensor ah = matmul(adj, h);
  Tensor z = sigmoid(add(add(matmul(ax, p["gru.W_z"]), matmul(ah, p["gru.U_z"])), p["gru.b_z"]));
  Tensor r = sigmoid(add(add(matmul(ax, p["gru.W_r"]), matmul(ah, p["gru.U_r"])), p["gru.b_r"]));
  Tensor arh = matmul(adj, multiply(r, h));
  Tensor cand = tanh(add(add(matmul(ax, p["gru.W_h"]), matmul(arh, p["gru.U_h"])), p["gru.b_h"]));
  return add(multiply(z, h), multiply(one_minus(z), cand));
}

Tensor tgcn_step(const Tensor& x, const Tensor& h, const Tensor& adj, const ModelParams& p) {
  using namespace diff;
  Tensor g = relu(matmul(matmul(adj, x), p["tgcn.W_g"]));
  Tensor gh = concat_columns(g, h);
  Tensor u = sigmoid(add(matmul(gh, p["tgcn.W_u"]), p["tgcn.b_u"]));
  Tensor r = sigmoid(add(matmul(gh, p["tgcn.W_r"]), p["tgcn.b_r"]));
  Tensor c = tanh(add(matmul(concat_columns(g, multiply(r, h)), p["tgcn.W_c"]), p["tgcn.b_c"]));
  return add(multiply(u, h), multiply(one_minus(u), c));
}

}  // namespace

Tensor cell_step(CellKind kind, const Tensor& embedded, const Tensor& previous,
                 const Tensor& adjacency, const ModelParams& params) {
  if (embedded.rows() != previous.rows() || embedded.cols() != previous.cols()) {
    throw DimensionError("cell_step: embedding " + embedded.shape_string() +
                         " vs hidden state " + previous.shape_string());
  }
  switch (kind) {
    case CellKind::GConvGRU: return gconvgru_step(embedded, previous, adjacency, params);
    case CellKind::TGCN:
    case CellKind::A3TGCN: return tgcn_step(embedded, previous, adjacency, params);
  }
  throw ConfigError("cell_step: unknown cell kind");
}

AttentionOutput temporal_attention(std::span<const Tensor> states, const ModelParams& params) {
  using namespace diff;
  if (states.empty()) throw ContractError("temporal_attention: empty state sequence");
  const Index d = states.front().cols();
  std::vector<Tensor> scores;
  scores.reserve(states.size());
  for (const Tensor& h : states) {
    scores.push_back(matmul(tanh(add(matmul(h, params["att.W_a"]), params["att.b_a"])),
                            params["att.v_a"]));
  }
  Tensor weights = softmax_rows(concat_columns(scores));
  const Tensor ones = Tensor::filled(1, d, 1.0);
  Tensor context;
  for (std::size_t t = 0; t < states.size(); ++t) {
    Tensor alpha = matmul(slice_columns(weights, static_cast<Index>(t), 1), ones);
    Tensor term = multiply(alpha, states[t]);
    context = context.defined() ? add(context, term) : term;
  }
  return {context, weights};
}

Tensor forward(const ModelConfig& config, const ModelParams& params,
               std::span<const Matrix> snapshots, const Tensor& adjacency) {
  using namespace diff;
  if (snapshots.empty()) throw ContractError("forward: bucket has no snapshots");
  const Index n = adjacency.rows();
  for (const Matrix& x : snapshots) {
    if (x.rows() != n || x.cols() != config.input_channels) {
      throw ConfigError("forward: snapshot is (" + std::to_string(x.rows()) + "x" +
                        std::to_string(x.cols()) + "), model expects (" + std::to_string(n) + "x" +
                        std::to_string(config.input_channels) + ")");
    }
  }
  Tensor h = Tensor::zeros(n, config.embed_dim);
  std::vector<Tensor> states;
  states.reserve(snapshots.size());
  for (const Matrix& x : snapshots) {
    Tensor embedded = gcn_embed(Tensor(x), adjacency, params);
    h = cell_step(config.cell, embedded, h, adjacency, params);
    if (config.cell == CellKind::A3TGCN) states.push_back(h);
  }
  Tensor node_state = config.cell == CellKind::A3TGCN ? temporal_attention(states, params).context : h;
  Tensor pooled = mean_rows(node_state);
  Tensor z1 = relu(add(matmul(pooled, params["head.W1"]), params["head.b1"]));
  Tensor z2 = relu(add(matmul(z1, params["head.W2"]), params["head.b2"]));
  return sigmoid(add(matmul(z2, params["head.W3"]), params["head.b3"]));
}

std::vector<Matrix> model_inputs(const LabeledBucket& bucket, const Checkpoint& checkpoint) {
  std::vector<Matrix> xs;
  xs.reserve(bucket.bucket.length);
  for (int i = 0; i < bucket.bucket.length; ++i) {
    const Matrix& raw = bucket.snapshot(i);
    if (checkpoint.input_bounds) {
      xs.push_back((2.0 * min_max_normalize(raw, *checkpoint.input_bounds).array() - 1.0).matrix());
    } else {
      xs.push_back(raw);
    }
  }
  return xs;
}

Tensor adjacency_tensor(const TemporalGraphSignal& signal, const ModelConfig& config) {
  return Tensor(normalized_adjacency(signal, config.symmetrize));
}

double forward(const LabeledBucket& bucket, const Checkpoint& checkpoint, const Tensor* adjacency) {
  const TemporalGraphSignal& signal = *bucket.bucket.signal;
  if (signal.num_channels() != checkpoint.config.input_channels) {
    throw ConfigError("forward: signal has " + std::to_string(signal.num_channels()) +
                      " channels, checkpoint expects " +
                      std::to_string(checkpoint.config.input_channels));
  }
  if (checkpoint.input_bounds && checkpoint.input_bounds->min.rows() != signal.num_nodes) {
    throw ConfigError("forward: signal has " + std::to_string(signal.num_nodes) +
                      " nodes, checkpoint was fit on " +
                      std::to_string(checkpoint.input_bounds->min.rows()));
  }
  const std::vector<Matrix> xs = model_inputs(bucket, checkpoint);
  if (adjacency != nullptr) return forward(checkpoint.config, checkpoint.params, xs, *adjacency).item();
  return forward(checkpoint.config, checkpoint.params, xs, adjacency_tensor(signal, checkpoint.config))
      .item();
}

double forward(const Bucket& bucket, const Checkpoint& checkpoint, const Tensor* adjacency) {
  return forward(clean(bucket), checkpoint, adjacency);
}

}  // namespace dgsp
