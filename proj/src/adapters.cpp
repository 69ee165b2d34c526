#include "dgsp/adapters.hpp"

#include "dgsp/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dgsp {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  out.erase(std::remove_if(out.begin(), out.end(), [](char c) { return c == '_' || c == '-'; }),
            out.end());
  return out;
}

[[noreturn]] void schema_error(DatasetKind kind, const json& raw, const std::string& detail) {
  std::ostringstream os;
  os << to_string(kind) << ": unrecognized schema (" << detail << "); fields found: [";
  if (raw.is_object()) {
    bool first = true;
    std::size_t shown = 0;
    for (const auto& [key, _] : raw.items()) {
      if (shown++ == 12) {
        os << ", ...";
        break;
      }
      os << (first ? "" : ", ") << key;
      first = false;
    }
  }
  os << "]";
  throw AdapterError(os.str());
}

const json& field(DatasetKind kind, const json& raw, const char* name) {
  if (!raw.is_object() || !raw.contains(name)) {
    schema_error(kind, raw, std::string("missing '") + name + "'");
  }
  return raw.at(name);
}

std::vector<Edge> edge_list(DatasetKind kind, const json& raw, const json& edges) {
  if (!edges.is_array()) schema_error(kind, raw, "'edges' is not an array");
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const json& e : edges) {
    if (!e.is_array() || e.size() != 2) schema_error(kind, raw, "edge is not a pair");
    out.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  return out;
}

// T x N array of scalars -> T snapshots of N x 1.
std::vector<Matrix> series_by_time(DatasetKind kind, const json& raw, const json& rows) {
  if (!rows.is_array() || rows.empty()) schema_error(kind, raw, "feature table is empty");
  std::vector<Matrix> out;
  out.reserve(rows.size());
  const std::size_t n = rows.front().size();
  for (const json& r : rows) {
    if (!r.is_array() || r.size() != n) schema_error(kind, raw, "ragged feature table");
    Matrix x(static_cast<Index>(n), 1);
    for (std::size_t v = 0; v < n; ++v) x(static_cast<Index>(v), 0) = r[v].get<double>();
    out.push_back(std::move(x));
  }
  return out;
}

TemporalGraphSignal from_chickenpox(const json& raw) {
  TemporalGraphSignal s;
  s.edges = edge_list(DatasetKind::Chickenpox, raw, field(DatasetKind::Chickenpox, raw, "edges"));
  s.weights.assign(s.edges.size(), 1.0);
  s.features = series_by_time(DatasetKind::Chickenpox, raw, field(DatasetKind::Chickenpox, raw, "FX"));
  return s;
}

TemporalGraphSignal from_pedalme(const json& raw) {
  constexpr auto kind = DatasetKind::PedalMe;
  TemporalGraphSignal s;
  s.edges = edge_list(kind, raw, field(kind, raw, "edges"));
  s.weights = field(kind, raw, "weights").get<std::vector<double>>();
  s.features = series_by_time(kind, raw, field(kind, raw, "X"));
  if (raw.contains("time_periods")) {
    auto periods = raw.at("time_periods").get<std::size_t>();
    if (periods < s.features.size()) s.features.resize(periods);
  }
  return s;
}

TemporalGraphSignal from_wikimath(const json& raw) {
  constexpr auto kind = DatasetKind::WikiMath;
  TemporalGraphSignal s;
  s.edges = edge_list(kind, raw, field(kind, raw, "edges"));
  s.weights = field(kind, raw, "weights").get<std::vector<double>>();
  const int periods = field(kind, raw, "time_periods").get<int>();
  json rows = json::array();
  for (int t = 0; t < periods; ++t) {
    const json& snap = field(kind, raw, std::to_string(t).c_str());
    rows.push_back(field(kind, snap, "y"));
  }
  s.features = series_by_time(kind, raw, rows);
  return s;
}

TemporalGraphSignal from_montevideo(const json& raw) {
  constexpr auto kind = DatasetKind::MontevideoBus;
  const json& nodes = field(kind, raw, "nodes");
  const json& links = field(kind, raw, "links");
  if (!nodes.is_array() || nodes.empty()) schema_error(kind, raw, "'nodes' is empty");
  std::map<std::string, int> ids;
  std::vector<std::vector<double>> series;
  for (const json& node : nodes) {
    const json key = node.contains("bus_stop") ? node.at("bus_stop") : json(ids.size());
    ids.emplace(key.dump(), static_cast<int>(series.size()));
    series.push_back(field(kind, node, "y").get<std::vector<double>>());
  }
  TemporalGraphSignal s;
  for (const json& link : links) {
    auto src = ids.find(field(kind, link, "source").dump());
    auto dst = ids.find(field(kind, link, "target").dump());
    if (src == ids.end() || dst == ids.end()) schema_error(kind, raw, "link to unknown stop");
    s.edges.push_back({src->second, dst->second});
    s.weights.push_back(link.contains("weight") ? link.at("weight").get<double>() : 1.0);
  }
  const std::size_t periods = series.front().size();
  json rows = json::array();
  for (std::size_t t = 0; t < periods; ++t) {
    json row = json::array();
    for (const auto& ser : series) {
      if (ser.size() != periods) schema_error(kind, raw, "ragged node series");
      row.push_back(ser[t]);
    }
    rows.push_back(std::move(row));
  }
  s.features = series_by_time(kind, raw, rows);
  return s;
}

}  // namespace

DatasetKind parse_dataset_kind(std::string_view text) {
  const std::string key = lower(text);
  if (key == "wikimath" || key == "wikivitalmathematics") return DatasetKind::WikiMath;
  if (key == "chickenpox") return DatasetKind::Chickenpox;
  if (key == "pedalme" || key == "pedalmelondon") return DatasetKind::PedalMe;
  if (key == "montevideobus" || key == "montevideo") return DatasetKind::MontevideoBus;
  if (key == "metrala" || key == "metr") return DatasetKind::MetraLa;
  throw ConfigError("unknown dataset kind '" + std::string(text) + "'");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::WikiMath: return "WikiMath";
    case DatasetKind::Chickenpox: return "Chickenpox";
    case DatasetKind::PedalMe: return "PedalMe";
    case DatasetKind::MontevideoBus: return "MontevideoBus";
    case DatasetKind::MetraLa: return "MetraLa";
  }
  return "unknown";
}

DatasetCounts reference_counts(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::WikiMath: return {1068, 27079, 731, "Daily"};
    case DatasetKind::Chickenpox: return {20, 102, 520, "Weekly"};
    case DatasetKind::PedalMe: return {15, 225, 30, "Weekly"};
    case DatasetKind::MetraLa: return {207, 1722, 3224, "5-Minutes"};
    case DatasetKind::MontevideoBus: return {678, 690, 734, "1-Hours"};
  }
  throw ConfigError("unknown dataset kind");
}

AdaptResult adapt_dataset(const json& raw, DatasetKind kind, bool require_reference_counts) {
  if (!raw.is_object() || raw.empty()) {
    schema_error(kind, raw,
                 kind == DatasetKind::MetraLa
                     ? "empty document; MetraLa must be pre-converted with tools/metrla_to_canonical.py"
                     : "empty document");
  }

  TemporalGraphSignal s;
  try {
    switch (kind) {
      case DatasetKind::Chickenpox: s = from_chickenpox(raw); break;
      case DatasetKind::PedalMe: s = from_pedalme(raw); break;
      case DatasetKind::WikiMath: s = from_wikimath(raw); break;
      case DatasetKind::MontevideoBus: s = from_montevideo(raw); break;
      case DatasetKind::MetraLa:
        if (!raw.contains("features")) {
          schema_error(kind, raw,
                       "MetraLa must be pre-converted with tools/metrla_to_canonical.py");
        }
        s = signal_from_json(raw, {.strict = false});
        break;
    }
  } catch (const json::exception& e) {
    schema_error(kind, raw, e.what());
  }

  const DatasetCounts ref = reference_counts(kind);
  if (kind != DatasetKind::MetraLa) {
    s.num_nodes = s.features.empty() ? 0 : static_cast<int>(s.features.front().rows());
    s.name = std::string(to_string(kind));
    s.frequency = std::string(ref.frequency);
  }
  try {
    s.validate();
  } catch (const ParseError& e) {
    throw AdapterError(std::string(to_string(kind)) + ": " + e.what());
  }

  AdaptResult result{std::move(s), {}};
  auto check = [&](const char* what, int got, int want) {
    if (got == want) return;
    std::string msg = std::string(to_string(kind)) + ": " + what + " = " + std::to_string(got) +
                      ", reference count is " + std::to_string(want);
    if (require_reference_counts) throw AdapterError(msg);
    result.warnings.push_back(std::move(msg));
  };
  check("nodes", result.signal.num_nodes, ref.num_nodes);
  check("edges", static_cast<int>(result.signal.edges.size()), ref.num_edges);
  check("snapshots", result.signal.num_snapshots(), ref.num_snapshots);
  return result;
}

AdaptResult adapt_dataset(const std::filesystem::path& raw, DatasetKind kind,
                          bool require_reference_counts) {
  std::ifstream in(raw);
  if (!in) throw AdapterError(raw.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  if (buf.str().find_first_not_of(" \t\r\n") == std::string::npos) {
    throw AdapterError(raw.string() + ": empty file; fields found: []");
  }
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw AdapterError(raw.string() + ": not JSON (" + e.what() + ")");
  }
  return adapt_dataset(doc, kind, require_reference_counts);
}

}  // namespace dgsp
