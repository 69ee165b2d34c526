#pragma once

#include "dgsp/temporal_graph.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace dgsp {

// A window of L consecutive snapshots [start, start + L). The first L - 1
// are history; the last is the candidate.
struct Bucket {
  std::shared_ptr<const TemporalGraphSignal> signal;
  int start = 0;
  int length = 0;

  int candidate_index() const { return start + length - 1; }
  const Matrix& snapshot(int i) const { return signal->features[start + i]; }
};

struct LabeledBucket {
  Bucket bucket;
  Matrix candidate;                 // N x F, possibly perturbed copy of the last snapshot
  double label = 1.0;
  std::vector<int> perturbed_nodes; // sorted ascending

  int num_nodes() const { return bucket.signal->num_nodes; }
  // History snapshots come from the signal; index length-1 is the candidate.
  const Matrix& snapshot(int i) const {
    return i == bucket.length - 1 ? candidate : bucket.snapshot(i);
  }
};

struct NoiseSpec {
  double corrupt_probability = 0.5;
  std::uint64_t seed = 0;
};

std::vector<Bucket> bucketize(std::shared_ptr<const TemporalGraphSignal> signal, int length,
                              int stride = 1);

// Clean labeling: candidate equals the source snapshot, label 1.
LabeledBucket clean(const Bucket& bucket);

// Replaces every channel of the given nodes in the candidate with independent
// uniform draws from that node-channel's [min, max]. Label is 1 - |nodes| / N.
LabeledBucket corrupt_nodes(const Bucket& bucket, const NodeBounds& bounds,
                            std::vector<int> nodes, std::uint64_t stream_seed);

// Each bucket is corrupted with probability p; a corrupted bucket perturbs
// k ~ uniform{1..N} distinct nodes. Bucket i draws from a stream derived from
// (spec.seed, i), so the output does not depend on evaluation order.
std::vector<LabeledBucket> inject_noise(const std::vector<Bucket>& buckets,
                                        const NodeBounds& bounds, const NoiseSpec& spec);

// Stream seed for bucket `index` under base seed `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace dgsp
