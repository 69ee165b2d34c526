#include "dgsp/baselines.hpp"

#include "dgsp/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dgsp {

std::string_view to_string(BaselineMethod method) {
  return method == BaselineMethod::Random ? "random" : "tsr";
}

std::vector<BaselinePrediction> random_baseline(const std::vector<LabeledBucket>& buckets,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BaselinePrediction> out;
  out.reserve(buckets.size());
  for (std::size_t i = 0; i < buckets.size(); ++i) out.push_back({unit(rng), BaselineMethod::Random});
  return out;
}

LinearFit ols_fit(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw ContractError("ols_fit: times and values differ in length");
  if (times.size() < 2) throw ContractError("ols_fit: need at least 2 points");
  const double n = static_cast<double>(times.size());
  double mt = 0.0;
  double mv = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    mt += times[i];
    mv += values[i];
  }
  mt /= n;
  mv /= n;
  double cov = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    cov += (times[i] - mt) * (values[i] - mv);
    var += (times[i] - mt) * (times[i] - mt);
  }
  if (var == 0.0) throw ContractError("ols_fit: all times are equal");
  LinearFit fit;
  fit.slope = cov / var;
  fit.intercept = mv - fit.slope * mt;
  return fit;
}

double tsr_series_score(std::span<const double> normalized_series) {
  const std::size_t length = normalized_series.size();
  if (length < 3) throw ContractError("tsr_series_score: need at least 3 points");
  std::vector<double> times(length - 1);
  for (std::size_t t = 0; t + 1 < length; ++t) times[t] = static_cast<double>(t);
  const LinearFit fit = ols_fit(times, normalized_series.first(length - 1));
  const double predicted = fit(static_cast<double>(length - 1));
  return std::clamp(1.0 - std::abs(normalized_series.back() - predicted), 0.0, 1.0);
}

double tsr_baseline(const LabeledBucket& bucket) {
  const int length = bucket.bucket.length;
  if (length < 3) {
    throw ContractError("tsr_baseline: bucket length " + std::to_string(length) + " < 3");
  }
  const int n = bucket.num_nodes();
  const Index channels = bucket.candidate.cols();
  std::vector<double> series(length);
  double total = 0.0;
  for (int v = 0; v < n; ++v) {
    double node_score = 0.0;
    for (Index c = 0; c < channels; ++c) {
      for (int t = 0; t < length; ++t) series[t] = bucket.snapshot(t)(v, c);
      const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
      const double min = *lo;
      const double span = *hi - *lo;
      for (double& x : series) x = span > 0.0 ? (x - min) / span : 0.0;
      node_score += tsr_series_score(series);
    }
    total += node_score / static_cast<double>(channels);
  }
  return total / static_cast<double>(n);
}

std::vector<BaselinePrediction> tsr_baseline(const std::vector<LabeledBucket>& buckets) {
  std::vector<BaselinePrediction> out;
  out.reserve(buckets.size());
  for (const LabeledBucket& b : buckets) out.push_back({tsr_baseline(b), BaselineMethod::TimeSeriesRegression});
  return out;
}

}  // namespace dgsp
