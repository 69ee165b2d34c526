#include "dgsp/temporal_graph.hpp"

#include "dgsp/error.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace dgsp {

using nlohmann::json;

namespace {

const std::set<std::string> kCanonicalFields = {"name",      "num_nodes", "edges",
                                                "weights",   "frequency", "features"};

const json& require(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) throw ParseError(std::string("missing field '") + field + "'");
  return *it;
}

double finite_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(where + ": non-finite value");
  return d;
}

}  // namespace

void TemporalGraphSignal::validate() const {
  if (num_nodes < 1) throw ParseError("num_nodes must be >= 1");
  if (weights.size() != edges.size()) {
    throw ParseError("weights: expected " + std::to_string(edges.size()) + " entries, got " +
                     std::to_string(weights.size()));
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& edge = edges[e];
    if (edge.src < 0 || edge.src >= num_nodes || edge.dst < 0 || edge.dst >= num_nodes) {
      throw ParseError("edges[" + std::to_string(e) + "]: index out of range (" +
                       std::to_string(edge.src) + "," + std::to_string(edge.dst) +
                       ") for num_nodes=" + std::to_string(num_nodes));
    }
    if (!std::isfinite(weights[e]) || weights[e] < 0.0) {
      throw ParseError("weights[" + std::to_string(e) + "]: must be finite and nonnegative");
    }
  }
  if (features.empty()) throw ParseError("features: at least one snapshot required");
  const Index channels = features.front().cols();
  if (channels < 1) throw ParseError("features[0]: at least one channel required");
  for (std::size_t s = 0; s < features.size(); ++s) {
    const Matrix& x = features[s];
    if (x.rows() != num_nodes || x.cols() != channels) {
      throw ParseError("features[" + std::to_string(s) + "]: ragged snapshot");
    }
    if (!x.allFinite()) throw ParseError("features[" + std::to_string(s) + "]: non-finite value");
  }
}

bool TemporalGraphSignal::operator==(const TemporalGraphSignal& other) const {
  if (name != other.name || num_nodes != other.num_nodes || edges != other.edges ||
      weights != other.weights || frequency != other.frequency ||
      features.size() != other.features.size()) {
    return false;
  }
  for (std::size_t s = 0; s < features.size(); ++s) {
    if (features[s].rows() != other.features[s].rows() ||
        features[s].cols() != other.features[s].cols() || features[s] != other.features[s]) {
      return false;
    }
  }
  return true;
}

void NodeBounds::merge(const NodeBounds& other) {
  if (min.rows() != other.min.rows() || min.cols() != other.min.cols()) {
    throw DimensionError("node bounds: cannot merge differently shaped bounds");
  }
  min = min.cwiseMin(other.min);
  max = max.cwiseMax(other.max);
}

TemporalGraphSignal signal_from_json(const json& doc, const LoadOptions& options) {
  if (!doc.is_object()) throw ParseError("top level: expected an object");
  for (const auto& [key, _] : doc.items()) {
    if (kCanonicalFields.contains(key)) continue;
    if (options.strict) throw ParseError("unknown field '" + key + "'");
    std::cerr << "warning: ignoring unknown field '" << key << "'\n";
  }

  TemporalGraphSignal s;
  const json& name = require(doc, "name");
  if (!name.is_string()) throw ParseError("name: expected a string");
  s.name = name.get<std::string>();

  const json& n = require(doc, "num_nodes");
  if (!n.is_number_integer()) throw ParseError("num_nodes: expected an integer");
  s.num_nodes = n.get<int>();

  const json& freq = require(doc, "frequency");
  if (!freq.is_string()) throw ParseError("frequency: expected a string");
  s.frequency = freq.get<std::string>();

  const json& edges = require(doc, "edges");
  if (!edges.is_array()) throw ParseError("edges: expected an array");
  s.edges.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const json& pair = edges[e];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer()) {
      throw ParseError("edges[" + std::to_string(e) + "]: expected [src, dst] integers");
    }
    s.edges.push_back({pair[0].get<int>(), pair[1].get<int>()});
  }

  if (auto it = doc.find("weights"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("weights: expected an array");
    for (std::size_t e = 0; e < it->size(); ++e) {
      s.weights.push_back(finite_number((*it)[e], "weights[" + std::to_string(e) + "]"));
    }
  } else {
    s.weights.assign(s.edges.size(), 1.0);
  }

  const json& feats = require(doc, "features");
  if (!feats.is_array() || feats.empty()) throw ParseError("features: expected a non-empty array");
  Index channels = -1;
  s.features.reserve(feats.size());
  for (std::size_t t = 0; t < feats.size(); ++t) {
    const json& snap = feats[t];
    std::string where = "features[" + std::to_string(t) + "]";
    if (!snap.is_array() || static_cast<int>(snap.size()) != s.num_nodes) {
      throw ParseError(where + ": ragged snapshot, expected " + std::to_string(s.num_nodes) +
                       " node rows");
    }
    for (std::size_t v = 0; v < snap.size(); ++v) {
      const json& row = snap[v];
      if (!row.is_array() || row.empty()) {
        throw ParseError(where + "[" + std::to_string(v) + "]: expected a non-empty array");
      }
      if (channels < 0) channels = static_cast<Index>(row.size());
      if (static_cast<Index>(row.size()) != channels) {
        throw ParseError(where + "[" + std::to_string(v) + "]: ragged channels, expected " +
                         std::to_string(channels));
      }
    }
    Matrix x(s.num_nodes, channels);
    for (int v = 0; v < s.num_nodes; ++v) {
      for (Index c = 0; c < channels; ++c) {
        x(v, c) = finite_number(snap[v][c], where + "[" + std::to_string(v) + "][" +
                                                std::to_string(c) + "]");
      }
    }
    s.features.push_back(std::move(x));
  }

  s.validate();
  return s;
}

json signal_to_json(const TemporalGraphSignal& signal) {
  json doc;
  doc["name"] = signal.name;
  doc["num_nodes"] = signal.num_nodes;
  json edges = json::array();
  for (const Edge& e : signal.edges) edges.push_back({e.src, e.dst});
  doc["edges"] = std::move(edges);
  doc["weights"] = signal.weights;
  doc["frequency"] = signal.frequency;
  json feats = json::array();
  for (const Matrix& x : signal.features) {
    json snap = json::array();
    for (Index v = 0; v < x.rows(); ++v) {
      json row = json::array();
      for (Index c = 0; c < x.cols(); ++c) row.push_back(x(v, c));
      snap.push_back(std::move(row));
    }
    feats.push_back(std::move(snap));
  }
  doc["features"] = std::move(feats);
  return doc;
}

TemporalGraphSignal load_canonical(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return signal_from_json(doc, options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_canonical(const TemporalGraphSignal& signal, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path.string() + ": cannot write");
  out << signal_to_json(signal).dump() << '\n';
}

Matrix normalized_adjacency(const TemporalGraphSignal& signal, bool symmetrize) {
  const int n = signal.num_nodes;
  // Row dst aggregates from column src.
  Matrix a = Matrix::Zero(n, n);
  for (std::size_t e = 0; e < signal.edges.size(); ++e) {
    const Edge& edge = signal.edges[e];
    if (edge.src == edge.dst) continue;
    const double w = signal.weights[e];
    a(edge.dst, edge.src) = std::max(a(edge.dst, edge.src), w);
    if (symmetrize) a(edge.src, edge.dst) = std::max(a(edge.src, edge.dst), w);
  }
  a.diagonal().array() += 1.0;
  Eigen::VectorXd inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

NodeBounds node_bounds(const TemporalGraphSignal& signal, SnapshotRange range) {
  if (range.begin < 0 || range.end > signal.num_snapshots() || range.begin >= range.end) {
    throw ContractError("node_bounds: empty or invalid snapshot range [" +
                        std::to_string(range.begin) + ", " + std::to_string(range.end) + ")");
  }
  NodeBounds b{signal.features[range.begin], signal.features[range.begin]};
  for (int t = range.begin + 1; t < range.end; ++t) {
    b.min = b.min.cwiseMin(signal.features[t]);
    b.max = b.max.cwiseMax(signal.features[t]);
  }
  return b;
}

NodeBounds node_bounds(const TemporalGraphSignal& signal) {
  return node_bounds(signal, {0, signal.num_snapshots()});
}

Matrix min_max_normalize(const Matrix& snapshot, const NodeBounds& bounds) {
  if (snapshot.rows() != bounds.min.rows() || snapshot.cols() != bounds.min.cols()) {
    throw DimensionError("min_max_normalize: snapshot does not match bounds shape");
  }
  Matrix out(snapshot.rows(), snapshot.cols());
  for (Index v = 0; v < snapshot.rows(); ++v) {
    for (Index c = 0; c < snapshot.cols(); ++c) {
      const double span = bounds.max(v, c) - bounds.min(v, c);
      out(v, c) = span > 0.0 ? (snapshot(v, c) - bounds.min(v, c)) / span : 0.0;
    }
  }
  return out;
}

TemporalGraphSignal min_max_normalize(const TemporalGraphSignal& signal, const NodeBounds& bounds) {
  TemporalGraphSignal out = signal;
  for (Matrix& x : out.features) x = min_max_normalize(x, bounds);
  return out;
}

}  // namespace dgsp
