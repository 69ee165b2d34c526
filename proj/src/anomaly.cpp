#include "dgsp/anomaly.hpp"

#include "dgsp/error.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace dgsp {

void AlarmPolicy::validate() const {
  if (mode == AlarmMode::FixedThreshold && !(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("alarm policy: threshold must lie in (0, 1)");
  }
  if (mode == AlarmMode::TrailingZScore) {
    if (window < 3) throw ConfigError("alarm policy: window must be >= 3");
    if (!(multiplier > 0.0)) throw ConfigError("alarm policy: multiplier must be > 0");
  }
}

std::vector<double> score_stream(std::shared_ptr<const TemporalGraphSignal> signal,
                                 const Checkpoint& checkpoint, int length) {
  if (signal->num_channels() != checkpoint.config.input_channels ||
      (checkpoint.input_bounds && checkpoint.input_bounds->min.rows() != signal->num_nodes)) {
    throw ConfigError("score_stream: signal shape (" + std::to_string(signal->num_nodes) + " nodes, " +
                      std::to_string(signal->num_channels()) +
                      " channels) is incompatible with the checkpoint");
  }
  const std::vector<Bucket> windows = bucketize(signal, length, 1);
  const diff::Tensor adjacency = adjacency_tensor(*signal, checkpoint.config);
  std::vector<double> scores;
  scores.reserve(windows.size());
  for (const Bucket& b : windows) scores.push_back(forward(b, checkpoint, &adjacency));
  return scores;
}

DetectionResult detect(std::span<const double> scores, const AlarmPolicy& policy, int first_index) {
  policy.validate();
  DetectionResult result;
  result.thresholds.assign(scores.size(), std::nullopt);

  if (policy.mode == AlarmMode::FixedThreshold) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      result.thresholds[i] = policy.threshold;
      if (scores[i] < policy.threshold) {
        result.events.push_back({first_index + static_cast<int>(i), scores[i], "fixed", 0.0, 0.0,
                                 policy.threshold});
      }
    }
    return result;
  }

  const std::size_t w = static_cast<std::size_t>(policy.window);
  if (scores.size() < w) {
    throw ContractError("detect: window " + std::to_string(w) + " exceeds series length " +
                        std::to_string(scores.size()));
  }
  // Most recent non-anomalous scores, oldest first.
  std::vector<double> trail;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (trail.size() >= w) {
      double mean = 0.0;
      for (std::size_t j = trail.size() - w; j < trail.size(); ++j) mean += trail[j];
      mean /= static_cast<double>(w);
      double var = 0.0;
      for (std::size_t j = trail.size() - w; j < trail.size(); ++j) {
        var += (trail[j] - mean) * (trail[j] - mean);
      }
      const double sd = std::sqrt(var / static_cast<double>(w));
      const double threshold = mean - policy.multiplier * sd;
      result.thresholds[i] = threshold;
      if (scores[i] < threshold) {
        result.events.push_back({first_index + static_cast<int>(i), scores[i], "zscore", mean, sd, threshold});
        continue;
      }
    }
    trail.push_back(scores[i]);
  }
  return result;
}

nlohmann::json events_to_json(const std::vector<AnomalyEvent>& events) {
  nlohmann::json out = nlohmann::json::array();
  for (const AnomalyEvent& e : events) {
    out.push_back({{"index", e.index},
                   {"score", e.score},
                   {"rule", e.rule},
                   {"trailing_mean", e.trailing_mean},
                   {"trailing_std", e.trailing_std},
                   {"threshold", e.threshold}});
  }
  return out;
}

std::string scores_to_csv(std::span<const double> scores, const DetectionResult& result, int first_index) {
  std::ostringstream os;
  os << std::setprecision(10) << "index,score,threshold\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    os << first_index + static_cast<int>(i) << ',' << scores[i] << ',';
    if (i < result.thresholds.size() && result.thresholds[i]) os << *result.thresholds[i];
    os << '\n';
  }
  return os.str();
}

}  // namespace dgsp
