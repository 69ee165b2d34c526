#pragma once

#include "dgsp/noise.hpp"
#include "dgsp/temporal_graph.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

namespace fixtures {

inline dgsp::Matrix random_matrix(dgsp::Index rows, dgsp::Index cols, std::mt19937_64& rng,
                                  double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  dgsp::Matrix m(rows, cols);
  for (dgsp::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Ring topology plus a chord, random non-negative features.
inline dgsp::TemporalGraphSignal random_signal(int nodes, int snapshots, int channels,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  dgsp::TemporalGraphSignal s;
  s.name = "random";
  s.num_nodes = nodes;
  s.frequency = "synthetic";
  for (int v = 0; v < nodes && nodes > 1; ++v) {
    s.edges.push_back({v, (v + 1) % nodes});
    s.weights.push_back(1.0);
  }
  if (nodes > 3) {
    s.edges.push_back({0, nodes / 2});
    s.weights.push_back(0.5);
  }
  for (int t = 0; t < snapshots; ++t) s.features.push_back(random_matrix(nodes, channels, rng, 0.0, 10.0));
  return s;
}

inline std::shared_ptr<const dgsp::TemporalGraphSignal> shared(dgsp::TemporalGraphSignal s) {
  return std::make_shared<const dgsp::TemporalGraphSignal>(std::move(s));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dgsp_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
