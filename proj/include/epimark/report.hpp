#pragma once

// Report rendering: full-fidelity JSON plus CSV tables and figure data.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "epimark/core.hpp"
#include "epimark/figures.hpp"
#include "epimark/metrics.hpp"

namespace epimark::report {

inline constexpr std::string_view kTable1Header = "model,i_avg_ece,c_avg_ece,num_ece,c_avg_cv,mac,mrc,i_avg_cv";

/// value * 100 with two decimals; "NA" when absent.
std::string percent(std::optional<double> value);

std::string table1_csv(std::span<const MetricReport> reports);
/// One row per (model, threshold): the four marker-analysis metrics.
std::string sweep_csv(std::span<const MetricReport> reports);
std::string pair_ece_csv(std::span<const MetricReport> reports);
std::string diversity_csv(std::span<const MetricReport> reports);
std::string dataset_ece_csv(const std::map<std::string, double>& dataset_ece);
std::string heatmap_csv(const figures::Heatmap& heatmap);
std::string ranking_csv(const std::map<std::string, std::vector<figures::RankedMarker>>& rankings);
/// Marker-confidence tables with their intervals.
std::string confidence_csv(const metrics::Tables& tables);

nlohmann::json reports_to_json(std::span<const MetricReport> reports);
std::vector<MetricReport> reports_from_json(const nlohmann::json& j);

struct ReportInputs {
  std::vector<MetricReport> reports;
  std::map<std::string, metrics::Tables> train_tables;  // model_id -> unfiltered training tables
};

struct ReportOptions {
  std::filesystem::path out_dir;
  bool json = true;
  bool csv = true;
  std::size_t heatmap_markers = 10;
  std::uint64_t seed = 0;
};

/// Writes the report files into out_dir and returns their paths. Output is
/// byte-identical for identical inputs.
std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs, const ReportOptions& options);

/// Filesystem-safe rendering of a model id.
std::string file_stem(std::string_view model_id);

}  // namespace epimark::report
