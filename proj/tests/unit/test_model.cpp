#include "doctest.h"

#include "dgsp/error.hpp"
#include "dgsp/model.hpp"

#include "fixtures.hpp"

#include <cmath>
#include <numeric>

using namespace dgsp;
using dgsp::diff::Tensor;

namespace {

ModelConfig small_config(CellKind cell, int channels = 1) {
  ModelConfig c;
  c.cell = cell;
  c.embed_dim = 4;
  c.attention_dim = 3;
  c.input_channels = channels;
  return c;
}

ModelParams random_params(const ModelConfig& config, std::uint64_t seed, double scale = 0.8) {
  std::mt19937_64 rng(seed);
  ModelParams p = ModelParams::zeros(config);
  for (auto& [name, t] : p.named()) {
    Tensor handle = t;
    handle.mutable_value() = fixtures::random_matrix(t.rows(), t.cols(), rng, -scale, scale);
  }
  return p;
}

void set(const ModelParams& p, const char* name, const Matrix& value) {
  Tensor handle = p[name];
  handle.mutable_value() = value;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop matrix product, independent of Eigen's kernels.
Matrix loop_matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

Matrix add_row(Matrix m, const Matrix& row) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) += row(0, j);
  return m;
}

Matrix oracle_embed(const Matrix& x, const Matrix& adj, const ModelParams& p) {
  Matrix h = add_row(loop_matmul(loop_matmul(adj, x), p["gcn.W"].value()), p["gcn.b"].value());
  for (Index i = 0; i < h.size(); ++i) h.data()[i] = std::max(0.0, h.data()[i]);
  return h;
}

Matrix oracle_gru(const Matrix& x, const Matrix& h, const Matrix& adj, const ModelParams& p) {
  const Matrix ax = loop_matmul(adj, x);
  const Matrix ah = loop_matmul(adj, h);
  const auto v = [&](const char* n) { return p[n].value(); };
  const Matrix zpre = add_row(loop_matmul(ax, v("gru.W_z")) + loop_matmul(ah, v("gru.U_z")), v("gru.b_z"));
  const Matrix rpre = add_row(loop_matmul(ax, v("gru.W_r")) + loop_matmul(ah, v("gru.U_r")), v("gru.b_r"));
  Matrix rh(h.rows(), h.cols());
  for (Index i = 0; i < h.rows(); ++i)
    for (Index j = 0; j < h.cols(); ++j) rh(i, j) = sig(rpre(i, j)) * h(i, j);
  const Matrix cpre =
      add_row(loop_matmul(ax, v("gru.W_h")) + loop_matmul(loop_matmul(adj, rh), v("gru.U_h")), v("gru.b_h"));
  Matrix out(h.rows(), h.cols());
  for (Index i = 0; i < h.rows(); ++i) {
    for (Index j = 0; j < h.cols(); ++j) {
      const double z = sig(zpre(i, j));
      out(i, j) = z * h(i, j) + (1.0 - z) * std::tanh(cpre(i, j));
    }
  }
  return out;
}

Matrix oracle_tgcn(const Matrix& x, const Matrix& h, const Matrix& adj, const ModelParams& p) {
  const auto v = [&](const char* n) { return p[n].value(); };
  Matrix g = loop_matmul(loop_matmul(adj, x), v("tgcn.W_g"));
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = std::max(0.0, g.data()[i]);
  const Index d = h.cols();
  Matrix gh(h.rows(), 2 * d);
  gh << g, h;
  const Matrix upre = add_row(loop_matmul(gh, v("tgcn.W_u")), v("tgcn.b_u"));
  const Matrix rpre = add_row(loop_matmul(gh, v("tgcn.W_r")), v("tgcn.b_r"));
  Matrix grh(h.rows(), 2 * d);
  for (Index i = 0; i < h.rows(); ++i) {
    for (Index j = 0; j < d; ++j) {
      grh(i, j) = g(i, j);
      grh(i, d + j) = sig(rpre(i, j)) * h(i, j);
    }
  }
  const Matrix cpre = add_row(loop_matmul(grh, v("tgcn.W_c")), v("tgcn.b_c"));
  Matrix out(h.rows(), d);
  for (Index i = 0; i < h.rows(); ++i) {
    for (Index j = 0; j < d; ++j) {
      const double u = sig(upre(i, j));
      out(i, j) = u * h(i, j) + (1.0 - u) * std::tanh(cpre(i, j));
    }
  }
  return out;
}

Matrix oracle_attention(const std::vector<Matrix>& states, const ModelParams& p, Matrix* weights) {
  const Index n = states.front().rows();
  const Index l = static_cast<Index>(states.size());
  Matrix e(n, l);
  for (Index t = 0; t < l; ++t) {
    Matrix pre = add_row(loop_matmul(states[t], p["att.W_a"].value()), p["att.b_a"].value());
    for (Index i = 0; i < pre.size(); ++i) pre.data()[i] = std::tanh(pre.data()[i]);
    e.col(t) = loop_matmul(pre, p["att.v_a"].value());
  }
  Matrix alpha(n, l);
  for (Index i = 0; i < n; ++i) {
    double total = 0.0;
    for (Index t = 0; t < l; ++t) total += std::exp(e(i, t));
    for (Index t = 0; t < l; ++t) alpha(i, t) = std::exp(e(i, t)) / total;
  }
  Matrix c = Matrix::Zero(n, states.front().cols());
  for (Index t = 0; t < l; ++t)
    for (Index i = 0; i < n; ++i) c.row(i) += alpha(i, t) * states[t].row(i);
  if (weights != nullptr) *weights = alpha;
  return c;
}

double oracle_forward(const ModelConfig& config, const ModelParams& p, const std::vector<Matrix>& xs,
                      const Matrix& adj) {
  Matrix h = Matrix::Zero(adj.rows(), config.embed_dim);
  std::vector<Matrix> states;
  for (const Matrix& x : xs) {
    const Matrix e = oracle_embed(x, adj, p);
    h = config.cell == CellKind::GConvGRU ? oracle_gru(e, h, adj, p) : oracle_tgcn(e, h, adj, p);
    states.push_back(h);
  }
  const Matrix node_state = config.cell == CellKind::A3TGCN ? oracle_attention(states, p, nullptr) : h;
  Matrix pooled = Matrix::Zero(1, node_state.cols());
  for (Index i = 0; i < node_state.rows(); ++i) pooled += node_state.row(i) / static_cast<double>(node_state.rows());
  auto dense = [&](const Matrix& in, const char* w, const char* b, bool relu) {
    Matrix out = add_row(loop_matmul(in, p[w].value()), p[b].value());
    if (relu)
      for (Index i = 0; i < out.size(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
    return out;
  };
  const Matrix z = dense(dense(dense(pooled, "head.W1", "head.b1", true), "head.W2", "head.b2", true),
                         "head.W3", "head.b3", false);
  return sig(z(0, 0));
}

Matrix path_adjacency(int n) {
  TemporalGraphSignal s;
  s.num_nodes = n;
  for (int v = 0; v + 1 < n; ++v) {
    s.edges.push_back({v, v + 1});
    s.weights.push_back(1.0 + 0.5 * v);
  }
  s.features = {Matrix::Zero(n, 1)};
  return normalized_adjacency(s);
}

std::vector<Matrix> random_inputs(int n, int l, int f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Matrix> xs;
  for (int t = 0; t < l; ++t) xs.push_back(fixtures::random_matrix(n, f, rng));
  return xs;
}

const CellKind kCells[] = {CellKind::GConvGRU, CellKind::TGCN, CellKind::A3TGCN};

}  // namespace

TEST_CASE("parameter layout follows the configuration") {
  ModelConfig c;
  c.input_channels = 2;
  const auto shapes = parameter_shapes(c);
  auto find = [&](const std::string& name) {
    for (const auto& s : shapes)
      if (s.name == name) return std::make_pair(s.rows, s.cols);
    return std::make_pair(Index{-1}, Index{-1});
  };
  CHECK(find("gcn.W") == std::make_pair(Index{2}, Index{32}));
  CHECK(find("tgcn.W_u") == std::make_pair(Index{64}, Index{32}));
  CHECK(find("att.v_a") == std::make_pair(Index{32}, Index{1}));
  CHECK(find("head.W1") == std::make_pair(Index{32}, Index{32}));
  CHECK(find("head.W2") == std::make_pair(Index{32}, Index{64}));
  CHECK(find("head.W3") == std::make_pair(Index{64}, Index{1}));
  CHECK(find("gru.W_z").first == -1);
  c.cell = CellKind::GConvGRU;
  CHECK(parameter_shapes(c)[2].name == "gru.W_z");
}

TEST_CASE("glorot init: bounded weights, zero biases, seed-deterministic") {
  const ModelConfig c;
  const ModelParams a = ModelParams::glorot(c, 1);
  const ModelParams b = ModelParams::glorot(c, 1);
  for (std::size_t i = 0; i < a.named().size(); ++i) {
    const auto& [name, t] = a.named()[i];
    CHECK(t.value() == b.named()[i].second.value());
    const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    if (name.find(".b") != std::string::npos) {
      CHECK(t.value().isZero());
    } else {
      CHECK(t.value().cwiseAbs().maxCoeff() <= limit);
    }
  }
  CHECK(ModelParams::glorot(c, 2).named()[0].second.value() != a.named()[0].second.value());
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_cell_kind("GConvLSTM"), ConfigError);
  CHECK(parse_cell_kind("a3tgcn") == CellKind::A3TGCN);
  ModelConfig c;
  c.embed_dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(ModelParams::zeros(small_config(CellKind::TGCN))["gru.W_z"], ConfigError);
}

TEST_CASE("gcn_embed: spec examples") {
  const ModelConfig c = small_config(CellKind::TGCN);
  const ModelParams zero = ModelParams::zeros(c);
  std::mt19937_64 rng(1);
  const Tensor adj(path_adjacency(5));
  CHECK(gcn_embed(Tensor(fixtures::random_matrix(5, 1, rng)), adj, zero).value().isZero());

  ModelConfig one = small_config(CellKind::TGCN);
  one.embed_dim = 1;
  const ModelParams p = ModelParams::zeros(one);
  set(p, "gcn.W", Matrix::Constant(1, 1, 3.0));
  CHECK(gcn_embed(Tensor(Matrix::Constant(1, 1, 2.0)), Tensor(Matrix::Ones(1, 1)), p).item() == 6.0);

  ModelConfig wide = small_config(CellKind::TGCN, 3);
  const ModelParams r = random_params(wide, 2);
  const Matrix x = fixtures::random_matrix(5, 3, rng);
  const Matrix got = gcn_embed(Tensor(x), adj, r).value();
  CHECK((got - oracle_embed(x, adj.value(), r)).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(gcn_embed(Tensor(fixtures::random_matrix(4, 3, rng)), adj, r), DimensionError);
}

TEST_CASE("cell_step: zero parameters keep a zero state") {
  const ModelConfig c = small_config(CellKind::GConvGRU);
  const ModelParams p = ModelParams::zeros(c);
  const Tensor h = cell_step(CellKind::GConvGRU, Tensor::zeros(3, 4), Tensor::zeros(3, 4),
                             Tensor(path_adjacency(3)), p);
  CHECK(h.value().isZero());
}

TEST_CASE("cell_step: saturated update gates carry the state") {
  std::mt19937_64 rng(3);
  const Tensor adj(path_adjacency(3));
  const Tensor x(fixtures::random_matrix(3, 4, rng));
  const Tensor prev(fixtures::random_matrix(3, 4, rng));
  {
    const ModelParams p = random_params(small_config(CellKind::GConvGRU), 4);
    set(p, "gru.b_z", Matrix::Constant(1, 4, 1000.0));
    CHECK(cell_step(CellKind::GConvGRU, x, prev, adj, p).value() == prev.value());
  }
  {
    const ModelParams p = random_params(small_config(CellKind::TGCN), 4);
    set(p, "tgcn.b_u", Matrix::Constant(1, 4, 1000.0));
    CHECK(cell_step(CellKind::TGCN, x, prev, adj, p).value() == prev.value());
  }
}

TEST_CASE("cell_step: scalar recomputation oracle on 3 nodes") {
  std::mt19937_64 rng(6);
  const Matrix adj = path_adjacency(3);
  const Matrix x = fixtures::random_matrix(3, 4, rng);
  const Matrix prev = fixtures::random_matrix(3, 4, rng);
  const ModelParams gru = random_params(small_config(CellKind::GConvGRU), 7);
  const ModelParams tg = random_params(small_config(CellKind::TGCN), 8);
  const Matrix a = cell_step(CellKind::GConvGRU, Tensor(x), Tensor(prev), Tensor(adj), gru).value();
  const Matrix b = cell_step(CellKind::TGCN, Tensor(x), Tensor(prev), Tensor(adj), tg).value();
  CHECK((a - oracle_gru(x, prev, adj, gru)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((b - oracle_tgcn(x, prev, adj, tg)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(cell_step(CellKind::TGCN, Tensor(x), Tensor::zeros(3, 5), Tensor(adj), tg), DimensionError);
}

TEST_CASE("temporal attention: spec examples and distribution property") {
  const ModelParams p = random_params(small_config(CellKind::A3TGCN), 9);
  std::mt19937_64 rng(10);
  const Tensor h1(fixtures::random_matrix(3, 4, rng));

  const std::vector<Tensor> single{h1};
  const AttentionOutput one = temporal_attention(single, p);
  CHECK(one.context.value() == h1.value());
  CHECK((one.weights.value().array() == 1.0).all());

  const std::vector<Tensor> same{h1, h1, h1};
  const AttentionOutput uniform = temporal_attention(same, p);
  CHECK((uniform.weights.value().array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  CHECK((uniform.context.value() - h1.value()).cwiseAbs().maxCoeff() < 1e-15);

  std::vector<Tensor> four;
  std::vector<Matrix> raw;
  for (int t = 0; t < 4; ++t) {
    raw.push_back(fixtures::random_matrix(3, 4, rng));
    four.emplace_back(raw.back());
  }
  const AttentionOutput out = temporal_attention(four, p);
  Matrix expected_weights;
  const Matrix expected = oracle_attention(raw, p, &expected_weights);
  const Matrix w = out.weights.value();
  CHECK((w.array() >= 0.0).all());
  for (Index i = 0; i < w.rows(); ++i) CHECK(std::abs(w.row(i).sum() - 1.0) < 1e-12);
  CHECK((w - expected_weights).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((out.context.value() - expected).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(temporal_attention(std::vector<Tensor>{}, p), ContractError);
}

TEST_CASE("forward: zero weights give 0.5") {
  for (CellKind cell : kCells) {
    const ModelConfig c = small_config(cell);
    const Tensor adj(path_adjacency(3));
    const auto xs = random_inputs(3, 4, 1, 1);
    CHECK(forward(c, ModelParams::zeros(c), xs, adj).item() == 0.5);
  }
}

TEST_CASE("forward: matches the composed oracle on a 3-node, L=4 bucket") {
  for (CellKind cell : kCells) {
    CAPTURE(to_string(cell));
    const ModelConfig c = small_config(cell, 2);
    const ModelParams p = random_params(c, 12);
    const Matrix adj = path_adjacency(3);
    const auto xs = random_inputs(3, 4, 2, 13);
    const double got = forward(c, p, xs, Tensor(adj)).item();
    CHECK(std::abs(got - oracle_forward(c, p, xs, adj)) < 1e-14);
    CHECK(got > 0.0);
    CHECK(got < 1.0);
  }
}

TEST_CASE("forward: node permutation invariance") {
  const int n = 6;
  TemporalGraphSignal s = fixtures::random_signal(n, 5, 2, 21);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  TemporalGraphSignal t = s;
  for (auto& e : t.edges) e = {perm[e.src], perm[e.dst]};
  for (std::size_t k = 0; k < s.features.size(); ++k)
    for (int v = 0; v < n; ++v) t.features[k].row(perm[v]) = s.features[k].row(v);

  for (CellKind cell : kCells) {
    CAPTURE(to_string(cell));
    ModelConfig c = small_config(cell, 2);
    c.embed_dim = 8;
    const ModelParams p = random_params(c, 22);
    const double a = forward(c, p, s.features, Tensor(normalized_adjacency(s))).item();
    const double b = forward(c, p, t.features, Tensor(normalized_adjacency(t))).item();
    CHECK(std::abs(a - b) < 1e-12);
  }
}

TEST_CASE("forward: gates saturated to carry make the output ignore the snapshots") {
  const Tensor adj(path_adjacency(4));
  auto base = random_inputs(4, 5, 1, 30);
  auto other = random_inputs(4, 5, 1, 31);
  other[0] = base[0];
  for (CellKind cell : kCells) {
    CAPTURE(to_string(cell));
    const ModelConfig c = small_config(cell);
    const ModelParams p = random_params(c, 32);
    set(p, cell == CellKind::GConvGRU ? "gru.b_z" : "tgcn.b_u", Matrix::Constant(1, 4, 1000.0));
    CHECK(forward(c, p, base, adj).item() == forward(c, p, other, adj).item());
  }
}

TEST_CASE("forward: gradient check of squared error on 3-node, L=4 buckets") {
  for (CellKind cell : kCells) {
    CAPTURE(to_string(cell));
    const ModelConfig c = small_config(cell);
    const ModelParams p = random_params(c, 40, 0.6);
    const Tensor adj(path_adjacency(3));
    const auto xs = random_inputs(3, 4, 1, 41);
    auto f = [&](const std::vector<Tensor>&) {
      return diff::square(diff::subtract(forward(c, p, xs, adj), Tensor::scalar(0.3)));
    };
    CHECK(diff::grad_check(f, p.tensors(), 1e-5) < 1e-4);
  }
}

TEST_CASE("forward on buckets checks shapes against the checkpoint") {
  auto s = fixtures::shared(fixtures::random_signal(5, 12, 2, 50));
  const Bucket b = bucketize(s, 4, 1).front();
  Checkpoint ck;
  ck.config = small_config(CellKind::TGCN, 1);
  ck.params = ModelParams::zeros(ck.config);
  CHECK_THROWS_AS(forward(b, ck), ConfigError);
  ck.config.input_channels = 2;
  ck.params = ModelParams::zeros(ck.config);
  CHECK(forward(b, ck) == 0.5);
  ck.input_bounds = NodeBounds{Matrix::Zero(3, 2), Matrix::Ones(3, 2)};
  CHECK_THROWS_AS(forward(b, ck), ConfigError);
}

TEST_CASE("checkpoint round-trips losslessly") {
  fixtures::TempDir dir;
  for (CellKind cell : kCells) {
    Checkpoint ck;
    ck.config = small_config(cell, 2);
    ck.config.symmetrize = false;
    ck.params = random_params(ck.config, 60);
    std::mt19937_64 rng(61);
    ck.input_bounds = NodeBounds{fixtures::random_matrix(4, 2, rng), fixtures::random_matrix(4, 2, rng)};
    ck.provenance = {"PedalMe", 7, 30, 0.0123456789012345, 1, 3, 7, "contiguous"};
    save_checkpoint(ck, dir / "ck.json");
    const Checkpoint back = load_checkpoint(dir / "ck.json");
    CHECK(back.config.cell == cell);
    CHECK(back.config.embed_dim == 4);
    CHECK(back.config.symmetrize == false);
    REQUIRE(back.params.named().size() == ck.params.named().size());
    for (std::size_t i = 0; i < ck.params.named().size(); ++i) {
      CHECK(back.params.named()[i].first == ck.params.named()[i].first);
      CHECK(back.params.named()[i].second.value() == ck.params.named()[i].second.value());
    }
    CHECK(back.input_bounds->min == ck.input_bounds->min);
    CHECK(back.provenance.final_train_loss == ck.provenance.final_train_loss);
    CHECK(back.provenance.fold_mode == "contiguous");
  }
}

TEST_CASE("checkpoint loading validates shapes") {
  Checkpoint ck;
  ck.config = small_config(CellKind::TGCN);
  ck.params = ModelParams::zeros(ck.config);
  nlohmann::json doc = checkpoint_to_json(ck);
  CHECK_NOTHROW(checkpoint_from_json(doc));
  doc["params"][0]["rows"] = 7;
  CHECK_THROWS_AS(checkpoint_from_json(doc), ParseError);
  doc = checkpoint_to_json(ck);
  doc["params"].erase(3);
  CHECK_THROWS_AS(checkpoint_from_json(doc), ParseError);
}
