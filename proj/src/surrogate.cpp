#include "dgsp/surrogate.hpp"

#include "dgsp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace dgsp::surrogate {

using nlohmann::json;

namespace {

struct Point {
  double x;
  double y;
};

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<Point> scatter(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> pts(n);
  for (Point& p : pts) p = {unit(rng), unit(rng)};
  return pts;
}

// Minimum spanning tree plus the shortest remaining pairs, `pairs` in total.
std::vector<std::pair<int, int>> proximity_pairs(const std::vector<Point>& pts, int pairs) {
  const int n = static_cast<int>(pts.size());
  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) all.emplace_back(i, j);
  }
  std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    return distance(pts[a.first], pts[a.second]) < distance(pts[b.first], pts[b.second]);
  });
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<std::pair<int, int>> chosen;
  std::vector<bool> used(all.size(), false);
  for (std::size_t k = 0; k < all.size(); ++k) {
    int a = find(all[k].first);
    int b = find(all[k].second);
    if (a != b) {
      parent[a] = b;
      chosen.push_back(all[k]);
      used[k] = true;
    }
  }
  for (std::size_t k = 0; k < all.size() && static_cast<int>(chosen.size()) < pairs; ++k) {
    if (!used[k]) chosen.push_back(all[k]);
  }
  chosen.resize(std::min<std::size_t>(chosen.size(), static_cast<std::size_t>(pairs)));
  return chosen;
}

struct SeriesShape {
  int period;
  double log_base_mean;
  double log_base_sd;
  double amplitude;      // seasonal amplitude in log space
  double noise_sd;
  double persistence;    // AR(1) coefficient
  double coupling;       // weight of neighbor average in the AR update
  double cycle_sd;       // per-cycle intensity effect
};

// T x N Poisson counts driven by a seasonal, spatially coupled log intensity.
std::vector<std::vector<double>> simulate_counts(int n, int steps, const SeriesShape& shape,
                                                 const std::vector<std::vector<int>>& neighbors,
                                                 std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> base(n);
  std::vector<double> phase(n);
  const double shared_phase = unit(rng) * shape.period;
  for (int v = 0; v < n; ++v) {
    base[v] = shape.log_base_mean + shape.log_base_sd * gauss(rng);
    phase[v] = shared_phase + 0.05 * shape.period * gauss(rng);
  }
  std::vector<double> state(n, 0.0);
  std::vector<double> next(n);
  double cycle_effect = 0.0;
  std::vector<std::vector<double>> out(steps, std::vector<double>(n));
  for (int t = 0; t < steps; ++t) {
    if (t % shape.period == 0) cycle_effect = shape.cycle_sd * gauss(rng);
    for (int v = 0; v < n; ++v) {
      double mix = 0.0;
      for (int u : neighbors[v]) mix += state[u];
      if (!neighbors[v].empty()) mix /= static_cast<double>(neighbors[v].size());
      next[v] = shape.persistence * state[v] + shape.coupling * mix + shape.noise_sd * gauss(rng);
    }
    state.swap(next);
    for (int v = 0; v < n; ++v) {
      const double season =
          shape.amplitude * std::cos(2.0 * std::numbers::pi * (t - phase[v]) / shape.period);
      const double rate = std::exp(base[v] + season + cycle_effect + state[v]);
      out[t][v] = static_cast<double>(std::poisson_distribution<long long>(rate)(rng));
    }
  }
  return out;
}

std::vector<std::vector<int>> neighbor_lists(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::set<int>> sets(n);
  for (auto [a, b] : edges) {
    if (a == b) continue;
    sets[a].insert(b);
    sets[b].insert(a);
  }
  std::vector<std::vector<int>> out(n);
  for (int v = 0; v < n; ++v) out[v].assign(sets[v].begin(), sets[v].end());
  return out;
}

json chickenpox(std::mt19937_64& rng) {
  const auto ref = reference_counts(DatasetKind::Chickenpox);
  const int n = ref.num_nodes;
  const auto pts = scatter(n, rng);
  // Each county carries a self-loop; the remaining entries are both
  // directions of proximity pairs.
  const auto pairs = proximity_pairs(pts, (ref.num_edges - n) / 2);
  std::vector<std::pair<int, int>> edges;
  for (int v = 0; v < n; ++v) edges.emplace_back(v, v);
  for (auto [a, b] : pairs) {
    edges.emplace_back(a, b);
    edges.emplace_back(b, a);
  }
  const SeriesShape shape{52, 3.2, 0.6, 1.4, 0.25, 0.7, 0.2, 0.3};
  const auto fx = simulate_counts(n, ref.num_snapshots, shape, neighbor_lists(n, edges), rng);
  json node_ids = json::object();
  for (int v = 0; v < n; ++v) node_ids["COUNTY_" + std::to_string(v)] = v;
  json e = json::array();
  for (auto [a, b] : edges) e.push_back({a, b});
  return {{"edges", e}, {"node_ids", node_ids}, {"FX", fx}};
}

json pedalme(std::mt19937_64& rng) {
  const auto ref = reference_counts(DatasetKind::PedalMe);
  const int n = ref.num_nodes;
  const auto pts = scatter(n, rng);
  json edges = json::array();
  std::vector<double> weights;
  std::vector<std::pair<int, int>> list;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      edges.push_back({a, b});
      list.emplace_back(a, b);
      weights.push_back(std::exp(-3.0 * distance(pts[a], pts[b])));
    }
  }
  const SeriesShape shape{52, 1.6, 0.7, 0.4, 0.3, 0.6, 0.2, 0.0};
  const auto x = simulate_counts(n, ref.num_snapshots, shape, neighbor_lists(n, list), rng);
  return {{"edges", edges}, {"weights", weights}, {"X", x}, {"time_periods", ref.num_snapshots}};
}

json wikimath(std::mt19937_64& rng) {
  const auto ref = reference_counts(DatasetKind::WikiMath);
  const int n = ref.num_nodes;
  std::uniform_int_distribution<int> any(0, n - 1);
  std::uniform_int_distribution<int> links(1, 5);
  // Zipf-like popularity for link targets.
  std::vector<double> popularity(n);
  for (int v = 0; v < n; ++v) popularity[v] = 1.0 / std::pow(1.0 + v, 0.8);
  std::discrete_distribution<int> target(popularity.begin(), popularity.end());
  std::set<std::pair<int, int>> seen;
  json edges = json::array();
  std::vector<double> weights;
  std::vector<std::pair<int, int>> list;
  while (static_cast<int>(seen.size()) < ref.num_edges) {
    int a = any(rng);
    int b = target(rng);
    if (a == b || !seen.emplace(a, b).second) continue;
    edges.push_back({a, b});
    list.emplace_back(a, b);
    weights.push_back(links(rng));
  }
  const SeriesShape shape{7, 6.0, 1.0, 0.25, 0.15, 0.8, 0.1, 0.1};
  const auto y = simulate_counts(n, ref.num_snapshots, shape, neighbor_lists(n, list), rng);
  json doc = {{"edges", edges}, {"weights", weights}, {"time_periods", ref.num_snapshots}};
  for (int t = 0; t < ref.num_snapshots; ++t) doc[std::to_string(t)] = {{"y", y[t]}};
  return doc;
}

json montevideo(std::mt19937_64& rng) {
  const auto ref = reference_counts(DatasetKind::MontevideoBus);
  const int n = ref.num_nodes;
  const auto pts = scatter(n, rng);
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<int, int>> list;
  // One long route visiting every stop, then extra shortcut links.
  for (int v = 0; v + 1 < n; ++v) {
    seen.emplace(v, v + 1);
    list.emplace_back(v, v + 1);
  }
  std::uniform_int_distribution<int> any(0, n - 1);
  while (static_cast<int>(list.size()) < ref.num_edges) {
    int a = any(rng);
    int b = any(rng);
    if (a == b || !seen.emplace(a, b).second) continue;
    list.emplace_back(a, b);
  }
  const SeriesShape shape{24, 1.5, 1.0, 1.0, 0.3, 0.5, 0.2, 0.1};
  const auto y = simulate_counts(n, ref.num_snapshots, shape, neighbor_lists(n, list), rng);
  json nodes = json::array();
  for (int v = 0; v < n; ++v) {
    std::vector<double> series(ref.num_snapshots);
    for (int t = 0; t < ref.num_snapshots; ++t) series[t] = y[t][v];
    nodes.push_back({{"bus_stop", 1000 + v}, {"y", series}});
  }
  json links = json::array();
  for (auto [a, b] : list) {
    links.push_back({{"source", 1000 + a}, {"target", 1000 + b}, {"weight", distance(pts[a], pts[b])}});
  }
  return {{"nodes", nodes}, {"links", links}};
}

json metrala(std::mt19937_64& rng) {
  const auto ref = reference_counts(DatasetKind::MetraLa);
  const int n = ref.num_nodes;
  const auto pts = scatter(n, rng);
  std::uniform_int_distribution<int> any(0, n - 1);
  std::set<std::pair<int, int>> seen;
  json edges = json::array();
  std::vector<double> weights;
  while (static_cast<int>(seen.size()) < ref.num_edges) {
    int a = any(rng);
    int b = any(rng);
    if (a == b || !seen.emplace(a, b).second) continue;
    edges.push_back({a, b});
    weights.push_back(std::exp(-distance(pts[a], pts[b])));
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int day = 288;
  json features = json::array();
  for (int t = 0; t < ref.num_snapshots; ++t) {
    const double tod = static_cast<double>(t % day) / day;
    const double rush = std::exp(-std::pow((tod - 0.33) / 0.05, 2)) + std::exp(-std::pow((tod - 0.72) / 0.06, 2));
    json snap = json::array();
    for (int v = 0; v < n; ++v) {
      const double speed = std::max(0.0, 65.0 - 25.0 * rush * (0.5 + pts[v].x) + 3.0 * gauss(rng));
      snap.push_back({speed, tod});
    }
    features.push_back(std::move(snap));
  }
  return {{"name", "MetraLa"},
          {"num_nodes", n},
          {"edges", edges},
          {"weights", weights},
          {"frequency", std::string(ref.frequency)},
          {"features", features}};
}

}  // namespace

json raw_document(DatasetKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (kind) {
    case DatasetKind::Chickenpox: return chickenpox(rng);
    case DatasetKind::PedalMe: return pedalme(rng);
    case DatasetKind::WikiMath: return wikimath(rng);
    case DatasetKind::MontevideoBus: return montevideo(rng);
    case DatasetKind::MetraLa: return metrala(rng);
  }
  throw ConfigError("surrogate: unknown dataset kind");
}

}  // namespace dgsp::surrogate
