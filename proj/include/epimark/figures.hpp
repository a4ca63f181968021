#pragma once

// Figure-ready data: marker-by-dataset confidence matrices, per-dataset
// rankings and marker diversity counts.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epimark/core.hpp"
#include "epimark/metrics.hpp"

namespace epimark::figures {

struct Heatmap {
  std::vector<std::string> markers;   // row labels
  std::vector<std::string> datasets;  // column labels
  std::vector<std::vector<std::optional<double>>> cells;  // empty: marker absent
};

Heatmap heatmap_matrix(const metrics::Tables& tables, std::span<const Marker> markers);

/// Up to `k` shared markers drawn uniformly with `seed`, in marker order.
std::vector<Marker> select_markers(const metrics::Tables& tables, std::size_t k, std::uint64_t seed);

struct RankedMarker {
  Marker marker = Marker::none();
  double confidence = 0.0;
  double rank = 0.0;  // 1 is the most confident; ties share the average
};

/// Per dataset, markers by descending confidence (ties by marker order).
std::map<std::string, std::vector<RankedMarker>> ranking_table(const metrics::Tables& tables);

/// Distinct normalized markers per (model_id, dataset_id) over marker-mode
/// records.
std::map<std::pair<std::string, std::string>, std::int64_t> marker_diversity(
    std::span<const ResponseRecord> records, bool include_none_marker = false);

}  // namespace epimark::figures
