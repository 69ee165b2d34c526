#include "dgsp/noise.hpp"

#include "dgsp/error.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace dgsp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<Bucket> bucketize(std::shared_ptr<const TemporalGraphSignal> signal, int length,
                              int stride) {
  const int s = signal->num_snapshots();
  if (length < 2) throw ContractError("bucketize: L must be >= 2, got " + std::to_string(length));
  if (length > s) {
    throw ContractError("bucketize: L=" + std::to_string(length) +
                        " exceeds snapshot count S=" + std::to_string(s));
  }
  if (stride < 1) throw ContractError("bucketize: stride must be >= 1");
  std::vector<Bucket> out;
  for (int start = 0; start + length <= s; start += stride) {
    out.push_back(Bucket{signal, start, length});
  }
  return out;
}

LabeledBucket clean(const Bucket& bucket) {
  return LabeledBucket{bucket, bucket.snapshot(bucket.length - 1), 1.0, {}};
}

LabeledBucket corrupt_nodes(const Bucket& bucket, const NodeBounds& bounds,
                            std::vector<int> nodes, std::uint64_t stream_seed) {
  const int n = bucket.signal->num_nodes;
  if (bounds.min.rows() != n || bounds.min.cols() != bucket.signal->num_channels()) {
    throw DimensionError("corrupt_nodes: bounds do not match signal shape");
  }
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw ContractError("corrupt_nodes: node list has duplicates");
  }
  LabeledBucket out = clean(bucket);
  std::mt19937_64 rng(stream_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int v : nodes) {
    if (v < 0 || v >= n) throw ContractError("corrupt_nodes: node index out of range");
    for (Index c = 0; c < out.candidate.cols(); ++c) {
      const double lo = bounds.min(v, c);
      const double hi = bounds.max(v, c);
      out.candidate(v, c) = std::clamp(lo + (hi - lo) * unit(rng), lo, hi);
    }
  }
  // (N - k) / N is the correctly rounded value of the rational label.
  out.label = static_cast<double>(n - static_cast<int>(nodes.size())) / static_cast<double>(n);
  out.perturbed_nodes = std::move(nodes);
  return out;
}

std::vector<LabeledBucket> inject_noise(const std::vector<Bucket>& buckets,
                                        const NodeBounds& bounds, const NoiseSpec& spec) {
  if (!(spec.corrupt_probability >= 0.0 && spec.corrupt_probability <= 1.0)) {
    throw ContractError("inject_noise: corrupt probability must lie in [0, 1]");
  }
  std::vector<LabeledBucket> out;
  out.reserve(buckets.size());
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const Bucket& b = buckets[i];
    std::mt19937_64 rng(derive_seed(spec.seed, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) >= spec.corrupt_probability) {
      out.push_back(clean(b));
      continue;
    }
    const int n = b.signal->num_nodes;
    const int k = std::uniform_int_distribution<int>(1, n)(rng);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: first k entries are a uniform k-subset.
    for (int j = 0; j < k; ++j) {
      std::swap(order[j], order[std::uniform_int_distribution<int>(j, n - 1)(rng)]);
    }
    order.resize(k);
    out.push_back(corrupt_nodes(b, bounds, std::move(order), rng()));
  }
  return out;
}

}  // namespace dgsp
