#include "epimark/report.hpp"

#include <fmt/format.h>

#include "epimark/json_io.hpp"

namespace epimark::report {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  std::string s = fmt::format("{:.{}f}", v, digits);
  if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string opt_fixed(std::optional<double> v, int digits) { return v ? fixed(*v, digits) : "NA"; }

std::string field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string percent(std::optional<double> value) { return value ? fixed(*value * 100.0, 2) : "NA"; }

std::string table1_csv(std::span<const MetricReport> reports) {
  std::string out(kTable1Header);
  out += '\n';
  for (const auto& r : reports) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", field(r.model_id), percent(r.i_avg_ece), percent(r.c_avg_ece),
                       percent(r.num_ece), percent(r.c_avg_cv), percent(r.mac), percent(r.mrc),
                       percent(r.i_avg_cv));
  }
  return out;
}

std::string sweep_csv(std::span<const MetricReport> reports) {
  std::string out = "model,threshold,c_avg_cv,mac,mrc,i_avg_cv,shared_markers\n";
  for (const auto& r : reports)
    for (const auto& row : r.sweep)
      out += fmt::format("{},{},{},{},{},{},{}\n", field(r.model_id), row.threshold, percent(row.c_avg_cv),
                         percent(row.mac), percent(row.mrc), percent(row.i_avg_cv), row.shared_markers);
  return out;
}

std::string pair_ece_csv(std::span<const MetricReport> reports) {
  std::string out = "model,train_dataset,test_dataset,ece,coverage\n";
  for (const auto& r : reports)
    for (const auto& p : r.per_dataset_ece)
      out += fmt::format("{},{},{},{},{}\n", field(r.model_id), field(p.train_dataset), field(p.test_dataset),
                         fixed(p.ece, 6), fixed(p.coverage, 6));
  return out;
}

std::string diversity_csv(std::span<const MetricReport> reports) {
  std::string out = "model,dataset,distinct_markers\n";
  for (const auto& r : reports)
    for (const auto& [id, n] : r.marker_diversity) out += fmt::format("{},{},{}\n", field(r.model_id), field(id), n);
  return out;
}

std::string dataset_ece_csv(const std::map<std::string, double>& dataset_ece) {
  std::string out = "dataset,avg_in_domain_ece\n";
  for (const auto& [id, e] : dataset_ece) out += fmt::format("{},{}\n", field(id), percent(e));
  return out;
}

std::string heatmap_csv(const figures::Heatmap& h) {
  std::string out = "marker";
  for (const auto& d : h.datasets) out += "," + field(d);
  out += '\n';
  for (std::size_t i = 0; i < h.markers.size(); ++i) {
    out += field(h.markers[i]);
    for (const auto& c : h.cells[i]) out += "," + opt_fixed(c, 4);
    out += '\n';
  }
  return out;
}

std::string ranking_csv(const std::map<std::string, std::vector<figures::RankedMarker>>& rankings) {
  std::string out = "dataset,rank,marker,confidence\n";
  for (const auto& [id, rows] : rankings)
    for (const auto& r : rows)
      out += fmt::format("{},{},{},{}\n", field(id), fixed(r.rank, 1), field(r.marker.wire()), fixed(r.confidence, 4));
  return out;
}

std::string confidence_csv(const metrics::Tables& tables) {
  std::string out = "dataset,marker,count,correct,confidence,lo,hi\n";
  for (const auto& [id, t] : tables)
    for (const auto& [m, s] : t.entries)
      out += fmt::format("{},{},{},{},{},{},{}\n", field(id), field(m.wire()), s.count, s.correct,
                         fixed(s.confidence, 4), fixed(s.interval.lo, 4), fixed(s.interval.hi, 4));
  return out;
}

json reports_to_json(std::span<const MetricReport> reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(r);
  return json{{"reports", std::move(arr)}};
}

std::vector<MetricReport> reports_from_json(const json& j) {
  try {
    return j.at("reports").get<std::vector<MetricReport>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report file: ") + e.what());
  }
}

std::string file_stem(std::string_view model_id) {
  std::string out;
  for (char c : model_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "model" : out;
}

std::vector<fs::path> emit_report(const ReportInputs& in, const ReportOptions& opt) {
  std::vector<fs::path> written;
  auto write = [&](const fs::path& name, std::string_view content) {
    const fs::path p = opt.out_dir / name;
    try {
      write_file_atomic(p, content);
    } catch (const std::exception& e) {
      throw Error("cannot write " + p.string() + ": " + e.what());
    }
    written.push_back(p);
  };

  if (opt.json) write("report.json", reports_to_json(in.reports).dump(2) + "\n");
  if (!opt.csv) return written;

  write("table1.csv", table1_csv(in.reports));
  write("thresholds.csv", sweep_csv(in.reports));
  write("pair_ece.csv", pair_ece_csv(in.reports));
  write("diversity.csv", diversity_csv(in.reports));

  std::map<std::pair<std::string, std::string>, double> runs;
  for (const auto& r : in.reports)
    for (const auto& p : r.per_dataset_ece)
      if (p.train_dataset == p.test_dataset) runs[{r.model_id, p.train_dataset}] = p.ece;
  write("dataset_ece.csv", dataset_ece_csv(metrics::dataset_avg_in_domain_ece(runs)));

  std::vector<metrics::ModelSummary> summaries;
  for (const auto& r : in.reports)
    if (r.c_avg_cv && r.mrc) summaries.push_back({r.model_id, r.mean_accuracy, *r.c_avg_cv, *r.mrc});
  if (summaries.size() >= 3) {
    json j{{"models", json::array()}};
    for (const auto& s : summaries) j["models"].push_back(s.model_id);
    try {
      const auto c = metrics::capability_correlation(summaries);
      j["r_acc_cv"] = c.r_acc_cv;
      j["r_acc_mrc"] = c.r_acc_mrc;
    } catch (const DataError& e) {
      j["error"] = e.what();
    }
    write("capability.json", j.dump(2) + "\n");
  }

  for (const auto& r : in.reports) {
    auto it = in.train_tables.find(r.model_id);
    if (it == in.train_tables.end()) continue;
    metrics::Tables filtered;
    for (const auto& [id, t] : it->second)
      filtered[id] = metrics::without_none_marker(metrics::filter_by_count(t, r.threshold));
    const std::string stem = file_stem(r.model_id);
    write("confidence_" + stem + ".csv", confidence_csv(it->second));
    write("ranking_" + stem + ".csv", ranking_csv(figures::ranking_table(filtered)));
    const auto chosen = figures::select_markers(filtered, opt.heatmap_markers, opt.seed);
    write("heatmap_" + stem + ".csv", heatmap_csv(figures::heatmap_matrix(filtered, chosen)));
  }
  return written;
}

}  // namespace epimark::report
