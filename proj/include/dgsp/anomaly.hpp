#pragma once

#include "dgsp/model.hpp"
#include "dgsp/temporal_graph.hpp"

#include "json.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dgsp {

enum class AlarmMode { FixedThreshold, TrailingZScore };

struct AlarmPolicy {
  AlarmMode mode = AlarmMode::TrailingZScore;
  double threshold = 0.7;  // fixed mode
  int window = 20;         // z-score mode
  double multiplier = 3.0; // z-score mode

  void validate() const;
};

struct AnomalyEvent {
  int index = 0;  // snapshot index of the candidate
  double score = 0.0;
  std::string rule;  // "fixed" or "zscore"
  double trailing_mean = 0.0;
  double trailing_std = 0.0;
  double threshold = 0.0;
};

// Score for every candidate index t in [L - 1, S - 1]; element i belongs to
// snapshot L - 1 + i.
std::vector<double> score_stream(std::shared_ptr<const TemporalGraphSignal> signal,
                                 const Checkpoint& checkpoint, int length);

struct DetectionResult {
  std::vector<AnomalyEvent> events;
  // Threshold in force at each score, empty where the z-score rule lacks history.
  std::vector<std::optional<double>> thresholds;
};

// `first_index` is the snapshot index of scores[0].
DetectionResult detect(std::span<const double> scores, const AlarmPolicy& policy, int first_index = 0);

nlohmann::json events_to_json(const std::vector<AnomalyEvent>& events);
std::string scores_to_csv(std::span<const double> scores, const DetectionResult& result, int first_index);

}  // namespace dgsp
