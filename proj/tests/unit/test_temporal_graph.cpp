#include "doctest.h"

#include "dgsp/error.hpp"
#include "dgsp/temporal_graph.hpp"

#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <limits>

using namespace dgsp;
using nlohmann::json;

namespace {

json minimal_doc() {
  return json::parse(R"({
    "name": "tiny", "num_nodes": 2, "edges": [[0, 1]], "frequency": "daily",
    "features": [[[1.0], [2.0]], [[3.0], [4.0]], [[5.0], [6.0]]]
  })");
}

std::string error_of(const json& doc, LoadOptions options = {}) {
  try {
    signal_from_json(doc, options);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

TemporalGraphSignal graph(int n, std::vector<Edge> edges, std::vector<double> weights = {}) {
  TemporalGraphSignal s;
  s.name = "g";
  s.num_nodes = n;
  s.edges = std::move(edges);
  s.weights = weights.empty() ? std::vector<double>(s.edges.size(), 1.0) : std::move(weights);
  s.features = {Matrix::Zero(n, 1)};
  return s;
}

Matrix brute_force_adjacency(const Matrix& a_plus_i) {
  const Index n = a_plus_i.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) d(i, i) = 1.0 / std::sqrt(a_plus_i.row(i).sum());
  return d * a_plus_i * d;
}

}  // namespace

TEST_CASE("load: minimal document") {
  const TemporalGraphSignal s = signal_from_json(minimal_doc());
  CHECK(s.num_nodes == 2);
  CHECK(s.num_snapshots() == 3);
  CHECK(s.num_channels() == 1);
  CHECK(s.weights == std::vector<double>{1.0});
  CHECK(s.features[2](1, 0) == 6.0);
}

TEST_CASE("load: malformed documents are rejected with a location") {
  json doc = minimal_doc();
  doc["edges"] = json::parse("[[5, 0]]");
  CHECK(error_of(doc).find("edges[0]: index out of range") != std::string::npos);

  doc = minimal_doc();
  doc.erase("features");
  CHECK(error_of(doc).find("missing field 'features'") != std::string::npos);

  doc = minimal_doc();
  doc["features"][1] = json::parse("[[1.0]]");
  CHECK(error_of(doc).find("features[1]: ragged") != std::string::npos);

  doc = minimal_doc();
  doc["features"][0][1] = json::parse("[1.0, 2.0]");
  CHECK(error_of(doc).find("features[0][1]: ragged channels") != std::string::npos);

  doc = minimal_doc();
  doc["features"][2][0][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_of(doc).find("features[2][0][0]: non-finite") != std::string::npos);

  doc = minimal_doc();
  doc["weights"] = json::parse("[-1.0]");
  CHECK(error_of(doc).find("weights[0]") != std::string::npos);

  doc = minimal_doc();
  doc["weights"] = json::parse("[1.0, 2.0]");
  CHECK(error_of(doc).find("weights") != std::string::npos);
}

TEST_CASE("load: unknown fields are rejected in strict mode only") {
  json doc = minimal_doc();
  doc["extra"] = 1;
  CHECK(error_of(doc).find("unknown field 'extra'") != std::string::npos);
  CHECK(error_of(doc, LoadOptions{false}).empty());
}

TEST_CASE("load: files report their path") {
  fixtures::TempDir dir;
  {
    std::ofstream out(dir / "bad.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_canonical(dir / "bad.json"), ParseError);
  CHECK_THROWS_AS(load_canonical(dir / "missing.json"), ParseError);
}

TEST_CASE("canonical write then load is the identity") {
  fixtures::TempDir dir;
  TemporalGraphSignal s = fixtures::random_signal(7, 12, 3, 99);
  s.weights[2] = 0.123456789012345678;
  write_canonical(s, dir / "s.json");
  CHECK(load_canonical(dir / "s.json") == s);
}

TEST_CASE("normalized adjacency: spec examples") {
  CHECK(normalized_adjacency(graph(1, {})) == Matrix::Ones(1, 1));

  const Matrix two = normalized_adjacency(graph(2, {{0, 1}}));
  CHECK(two.isApprox(Matrix::Constant(2, 2, 0.5), 1e-15));

  Matrix a_plus_i(3, 3);
  a_plus_i << 1, 1, 0, 1, 1, 1, 0, 1, 1;
  const Matrix path = normalized_adjacency(graph(3, {{0, 1}, {1, 2}}));
  CHECK((path - brute_force_adjacency(a_plus_i)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("normalized adjacency: isolated nodes and input self-loops") {
  const Matrix a = normalized_adjacency(graph(3, {{0, 0}, {0, 1}}));
  CHECK(a.allFinite());
  CHECK(a(2, 2) == 1.0);
  CHECK(a(0, 0) == doctest::Approx(0.5));  // the input self-loop is not counted on top of +I
}

TEST_CASE("normalized adjacency: duplicate pairs keep the larger weight") {
  const Matrix a = normalized_adjacency(graph(2, {{0, 1}, {1, 0}, {0, 1}}, {0.5, 2.0, 1.0}));
  Matrix expected(2, 2);
  expected << 1, 2, 2, 1;
  CHECK((a - brute_force_adjacency(expected)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("normalized adjacency: directed mode keeps direction") {
  const Matrix a = normalized_adjacency(graph(2, {{0, 1}}), false);
  // Row 1 aggregates from node 0; row 0 sees only itself.
  CHECK(a(0, 1) == 0.0);
  CHECK(a(1, 0) > 0.0);
}

TEST_CASE("normalized adjacency: symmetry, non-negativity and reconstruction") {
  const TemporalGraphSignal s = fixtures::random_signal(9, 1, 1, 4);
  TemporalGraphSignal unweighted = s;
  std::fill(unweighted.weights.begin(), unweighted.weights.end(), 1.0);
  const Matrix a = normalized_adjacency(unweighted);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.array() >= 0.0).all());

  Matrix a_plus_i = Matrix::Identity(9, 9);
  for (const Edge& e : unweighted.edges) a_plus_i(e.src, e.dst) = a_plus_i(e.dst, e.src) = 1.0;
  Eigen::VectorXd degree = a_plus_i.rowwise().sum();
  const Matrix back = degree.cwiseSqrt().asDiagonal() * a * degree.cwiseSqrt().asDiagonal();
  CHECK((back - a_plus_i).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("node bounds: spec examples") {
  TemporalGraphSignal s = graph(1, {});
  s.features = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 5.0), Matrix::Constant(1, 1, 3.0)};
  const NodeBounds b = node_bounds(s);
  CHECK(b.min(0, 0) == 1.0);
  CHECK(b.max(0, 0) == 5.0);

  TemporalGraphSignal c = graph(3, {});
  c.features.assign(4, Matrix::Constant(3, 2, 7.5));
  const NodeBounds cb = node_bounds(c);
  CHECK((cb.min.array() == 7.5).all());
  CHECK((cb.max.array() == 7.5).all());

  CHECK_THROWS_AS(node_bounds(c, {2, 2}), ContractError);
  CHECK_THROWS_AS(node_bounds(c, {0, 5}), ContractError);
}

TEST_CASE("node bounds: full-scan oracle and monotonicity on a 20 x 520 signal") {
  const TemporalGraphSignal s = fixtures::random_signal(20, 520, 1, 77);
  const NodeBounds b = node_bounds(s);
  for (int v = 0; v < 20; ++v) {
    double lo = s.features[0](v, 0);
    double hi = lo;
    for (const Matrix& x : s.features) {
      lo = std::min(lo, x(v, 0));
      hi = std::max(hi, x(v, 0));
    }
    CHECK(b.min(v, 0) == lo);
    CHECK(b.max(v, 0) == hi);
  }
  NodeBounds previous = node_bounds(s, {200, 201});
  for (int begin = 199, end = 202; begin >= 0; --begin, end = std::min(520, end + 1)) {
    const NodeBounds wider = node_bounds(s, {begin, end});
    CHECK((wider.max.array() >= previous.max.array()).all());
    CHECK((wider.min.array() <= previous.min.array()).all());
    previous = wider;
  }
}

TEST_CASE("min-max normalize: spec examples") {
  TemporalGraphSignal s = graph(2, {});
  s.features = {Matrix::Zero(2, 1), Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  const double node0[] = {2, 4, 6};
  for (int t = 0; t < 3; ++t) {
    s.features[t](0, 0) = node0[t];
    s.features[t](1, 0) = 7.0;
  }
  const TemporalGraphSignal n = min_max_normalize(s, node_bounds(s));
  CHECK(n.features[0](0, 0) == 0.0);
  CHECK(n.features[1](0, 0) == 0.5);
  CHECK(n.features[2](0, 0) == 1.0);
  for (int t = 0; t < 3; ++t) CHECK(n.features[t](1, 0) == 0.0);
}

TEST_CASE("min-max normalize: formula oracle and out-of-range inputs") {
  const TemporalGraphSignal s = fixtures::random_signal(20, 50, 2, 5);
  const NodeBounds b = node_bounds(s, {0, 25});
  for (int t = 0; t < 50; ++t) {
    const Matrix x = min_max_normalize(s.features[t], b);
    for (int c = 0; c < 2; ++c) {
      const double expected = (s.features[t](0, c) - b.min(0, c)) / (b.max(0, c) - b.min(0, c));
      CHECK(x(0, c) == doctest::Approx(expected).epsilon(1e-15));
    }
    if (t < 25) CHECK(((x.array() >= 0.0) && (x.array() <= 1.0)).all());
  }
  CHECK_THROWS_AS(min_max_normalize(Matrix::Zero(3, 2), b), DimensionError);
}
