#pragma once

#include "dgsp/temporal_graph.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dgsp {

enum class DatasetKind { WikiMath, Chickenpox, PedalMe, MontevideoBus, MetraLa };

DatasetKind parse_dataset_kind(std::string_view text);
std::string_view to_string(DatasetKind kind);

// Published node/edge/snapshot counts for each dataset.
struct DatasetCounts {
  int num_nodes;
  int num_edges;
  int num_snapshots;
  std::string_view frequency;
};

DatasetCounts reference_counts(DatasetKind kind);

struct AdaptResult {
  TemporalGraphSignal signal;
  std::vector<std::string> warnings;  // count mismatches against reference_counts
};

// Converts one of the published raw JSON files into a canonical signal.
//   Chickenpox     {"edges", "FX", "node_ids"?}
//   PedalMe        {"edges", "weights", "X", "time_periods"}
//   WikiMath       {"edges", "weights", "time_periods", "<t>": {"y": [...]}}
//   MontevideoBus  {"nodes": [{"y": [...]}...], "links": [{"source","target","weight"}]}
//   MetraLa        canonical JSON produced by tools/metrla_to_canonical.py
// With require_reference_counts, a count mismatch is an AdapterError rather
// than a warning.
AdaptResult adapt_dataset(const std::filesystem::path& raw, DatasetKind kind,
                          bool require_reference_counts = false);
AdaptResult adapt_dataset(const nlohmann::json& raw, DatasetKind kind,
                          bool require_reference_counts = false);

}  // namespace dgsp
