#pragma once

// Marker-confidence tables and the stability/calibration metrics built on
// them.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epimark/core.hpp"
#include "epimark/stats.hpp"

namespace epimark::metrics {

using Tables = std::map<std::string, ConfidenceTable>;  // dataset_id -> table

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// Per-marker accuracy over marker-mode records with valid answers, all of
/// one (dataset, model, split). Each entry carries a Wilson interval at
/// `level`. Throws DataError on mixed ids or unusable records.
ConfidenceTable marker_confidence_table(std::span<const ResponseRecord> records, double level = 0.95);

/// Keeps exactly the entries with count >= threshold.
ConfidenceTable filter_by_count(const ConfidenceTable& table, std::int64_t threshold);

ConfidenceTable without_none_marker(const ConfidenceTable& table);

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

struct Transfer {
  double ece = 0.0;
  double coverage = 0.0;
  std::int64_t covered = 0;
  std::int64_t total = 0;
};

/// Thrown by ece_marker_transfer when no test record's marker is in the table.
class ZeroCoverageError : public DataError {
 public:
  explicit ZeroCoverageError(std::int64_t total)
      : DataError("no test marker appears in the training table (" + std::to_string(total) + " records)"),
        total_(total) {}
  double coverage() const { return 0.0; }
  std::int64_t total() const { return total_; }

 private:
  std::int64_t total_;
};

/// Predicts each test record's correctness with its marker's training
/// confidence. Records whose marker is missing from the table are excluded
/// and reflected in `coverage`.
Transfer ece_marker_transfer(const ConfidenceTable& train_table, std::span<const ResponseRecord> test_records,
                             stats::EceBins bins = stats::EceBins::per_prediction());

/// ECE of the valid numeric confidences; nullopt when there are none.
std::optional<double> numeric_ece(std::span<const ResponseRecord> records,
                                  stats::EceBins bins = stats::EceBins::per_prediction());

struct MetricGrid {
  Tables tables;  // training split, unfiltered
  std::map<std::string, std::vector<ResponseRecord>> test_records;
  std::map<std::string, std::vector<ResponseRecord>> numeric_records;
  std::map<std::string, double> accuracies;
  std::map<std::pair<std::string, std::string>, PairEce> ece_pairs;  // ordered (train, test)

  /// Union of the datasets named by tables and ece_pairs.
  std::vector<std::string> datasets() const;
};

/// Fills grid.ece_pairs for every ordered pair, the diagonal included.
/// Zero-coverage pairs are left out and reported in `skipped`.
void compute_ece_pairs(MetricGrid& grid, stats::EceBins bins, std::vector<Skip>* skipped = nullptr);

struct EceAggregate {
  std::optional<double> i_avg_ece;
  std::optional<double> c_avg_ece;
  std::optional<double> num_ece;
  std::int64_t in_domain_pairs = 0;
  std::int64_t cross_pairs = 0;          // pairs averaged into c_avg_ece
  std::int64_t cross_pairs_expected = 0;  // |D| * (|D| - 1)
  std::vector<Skip> skipped;
};

/// Averages grid.ece_pairs: the diagonal into i_avg_ece and the ordered
/// off-diagonal pairs into c_avg_ece; num_ece is the mean per-dataset ECE
/// of grid.numeric_records.
EceAggregate aggregate_ece(const MetricGrid& grid, stats::EceBins bins = stats::EceBins::per_prediction());

// ---------------------------------------------------------------------------
// Marker analysis
// ---------------------------------------------------------------------------

/// A metric value plus the units (datasets, markers or pairs) it averaged.
/// `value` is empty when no unit was usable.
struct MetricValue {
  std::optional<double> value;
  std::int64_t enumerated = 0;
  std::int64_t used = 0;
  std::vector<Skip> skipped;
};

/// Markers present in every table.
std::vector<Marker> shared_markers(const Tables& tables);

/// Mean over datasets of the CV of marker confidences within the dataset.
MetricValue i_avg_cv(const Tables& tables);

/// Mean over globally shared markers of the CV of that marker's confidence
/// across datasets.
MetricValue c_avg_cv(const Tables& tables);

/// Mean over globally shared markers of the Pearson correlation between the
/// marker's confidence and model accuracy across datasets.
MetricValue mac(const Tables& tables, const std::map<std::string, double>& accuracies);

/// Mean over unordered dataset pairs of the Spearman correlation of the
/// pair's shared markers (pairwise intersection, at least two markers).
MetricValue mrc(const Tables& tables);

// ---------------------------------------------------------------------------
// Cross-model analyses
// ---------------------------------------------------------------------------

struct ModelSummary {
  std::string model_id;
  double mean_accuracy = 0.0;
  double c_avg_cv = 0.0;
  double mrc = 0.0;
};

struct CapabilityCorrelation {
  double r_acc_cv = 0.0;
  double r_acc_mrc = 0.0;
};

/// Pearson correlations of accuracy with C-AvgCV and with MRC over at
/// least three models.
CapabilityCorrelation capability_correlation(std::span<const ModelSummary> models);

/// Per dataset, the mean over models of the in-domain ECE.
std::map<std::string, double> dataset_avg_in_domain_ece(
    const std::map<std::pair<std::string, std::string>, double>& runs);  // (model, dataset) -> ECE

}  // namespace epimark::metrics
