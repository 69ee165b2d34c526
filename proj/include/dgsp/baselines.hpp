#pragma once

#include "dgsp/noise.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dgsp {

enum class BaselineMethod { Random, TimeSeriesRegression };

std::string_view to_string(BaselineMethod method);

struct BaselinePrediction {
  double value = 0.0;
  BaselineMethod method = BaselineMethod::Random;
};

// Independent uniform(0, 1) draw per bucket.
std::vector<BaselinePrediction> random_baseline(const std::vector<LabeledBucket>& buckets,
                                                std::uint64_t seed);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double t) const { return intercept + slope * t; }
};

// Closed-form least squares of values on times.
LinearFit ols_fit(std::span<const double> times, std::span<const double> values);

// Fits a line to all but the last point of an already normalized series and
// returns 1 - |last - extrapolation| clamped to [0, 1].
double tsr_series_score(std::span<const double> normalized_series);

// Per node (and channel): min-max normalize the L-length series over its own
// range, fit a line to the first L - 1 points, extrapolate to t = L - 1 and
// score 1 - |last - prediction| clamped to [0, 1]. Channel scores average to a
// node score; node scores average to the bucket score.
double tsr_baseline(const LabeledBucket& bucket);

std::vector<BaselinePrediction> tsr_baseline(const std::vector<LabeledBucket>& buckets);

}  // namespace dgsp
