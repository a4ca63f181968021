#pragma once

// Turns a model's extracted records into a MetricReport.

#include <cstdint>
#include <span>
#include <vector>

#include "epimark/core.hpp"
#include "epimark/metrics.hpp"
#include "epimark/stats.hpp"

namespace epimark {

struct EvaluateOptions {
  std::int64_t threshold = 10;
  std::vector<std::int64_t> thresholds;  // sweep; empty means {threshold}
  bool include_none_marker = false;      // in the marker-analysis metrics
  stats::EceBins bins = stats::EceBins::per_prediction();
  double coverage_floor = 0.5;
  double interval_level = 0.95;
};

struct ModelEvaluation {
  MetricReport report;
  metrics::Tables train_tables;     // unfiltered, used for transfer ECE
  metrics::Tables analysis_tables;  // filtered at the main threshold
  metrics::EceAggregate ece;
  metrics::MetricValue c_avg_cv;
  metrics::MetricValue mac;
  metrics::MetricValue mrc;
  metrics::MetricValue i_avg_cv;
};

/// Total order used to make every computation independent of input order.
bool canonical_less(const ResponseRecord& a, const ResponseRecord& b);
std::vector<ResponseRecord> canonical_order(std::span<const ResponseRecord> records);

/// Evaluates the records of a single model. Marker-mode training records
/// build the tables and per-dataset accuracies; marker-mode test records are
/// the transfer targets; numeric-mode records feed NumECE.
ModelEvaluation evaluate_model(std::span<const ResponseRecord> records, const EvaluateOptions& options = {});

/// Groups records by model_id and evaluates each group, in model_id order.
std::vector<ModelEvaluation> evaluate_all(std::span<const ResponseRecord> records,
                                          const EvaluateOptions& options = {});

}  // namespace epimark
