#pragma once

#include "dgsp/tensor.hpp"

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dgsp {

struct Edge {
  int src = 0;
  int dst = 0;
  bool operator==(const Edge&) const = default;
};

// Static topology with one N x F feature matrix per snapshot.
struct TemporalGraphSignal {
  std::string name;
  int num_nodes = 0;
  std::vector<Edge> edges;
  std::vector<double> weights;     // one per edge
  std::vector<Matrix> features;    // S snapshots, each N x F
  std::string frequency;

  int num_snapshots() const { return static_cast<int>(features.size()); }
  int num_channels() const { return features.empty() ? 0 : static_cast<int>(features.front().cols()); }

  // Throws ParseError describing the first violated invariant.
  void validate() const;

  bool operator==(const TemporalGraphSignal&) const;
};

// Half-open snapshot range [begin, end).
struct SnapshotRange {
  int begin = 0;
  int end = 0;
};

// Per (node, channel) minimum and maximum.
struct NodeBounds {
  Matrix min;  // N x F
  Matrix max;  // N x F

  // Elementwise widening by another set of bounds over the same shape.
  void merge(const NodeBounds& other);
};

struct LoadOptions {
  bool strict = true;  // reject unknown top-level fields instead of warning
};

TemporalGraphSignal signal_from_json(const nlohmann::json& doc, const LoadOptions& options = {});
nlohmann::json signal_to_json(const TemporalGraphSignal& signal);

TemporalGraphSignal load_canonical(const std::filesystem::path& path, const LoadOptions& options = {});
void write_canonical(const TemporalGraphSignal& signal, const std::filesystem::path& path);

// D^-1/2 (A + I) D^-1/2 with D the degree of A + I. Input self-loops are
// dropped so the identity is never counted twice. When symmetrize is set,
// each edge contributes to both (src,dst) and (dst,src); a pair listed in
// both directions keeps the larger weight rather than summing.
Matrix normalized_adjacency(const TemporalGraphSignal& signal, bool symmetrize = true);

NodeBounds node_bounds(const TemporalGraphSignal& signal, SnapshotRange range);
NodeBounds node_bounds(const TemporalGraphSignal& signal);

// (x - min) / (max - min); degenerate ranges map to 0.
Matrix min_max_normalize(const Matrix& snapshot, const NodeBounds& bounds);
TemporalGraphSignal min_max_normalize(const TemporalGraphSignal& signal, const NodeBounds& bounds);

}  // namespace dgsp
