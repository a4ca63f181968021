#pragma once

// Scalar statistics used by the metrics: calibration error, dispersion,
// correlation and binomial intervals.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epimark/core.hpp"

namespace epimark::stats {

struct EceSample {
  double confidence = 0.0;  // in [0,1]
  bool correct = false;
};

/// Equal-width binning for ece(). per_prediction uses as many bins as there
/// are samples.
struct EceBins {
  enum class Kind { per_prediction, fixed };
  Kind kind = Kind::per_prediction;
  int bins = 0;  // fixed mode only

  static EceBins per_prediction() { return {}; }
  static EceBins fixed(int b);
  /// "per_prediction" or "fixed:B".
  static EceBins parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const EceBins&, const EceBins&) = default;
};

/// Binned expected calibration error: sum over bins of |bin|/N times
/// |accuracy - mean confidence|. Bin of c is min(floor(c*B), B-1).
double ece(std::span<const EceSample> samples, EceBins bins = EceBins::per_prediction());

double mean(std::span<const double> values);

/// Population standard deviation over mean.
double cv(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks in ascending order of value; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of the average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

/// Wilson score interval for correct/count at the given two-sided level.
Interval binomial_interval(std::int64_t correct, std::int64_t count, double level = 0.95);

}  // namespace epimark::stats
