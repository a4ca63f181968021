#include "epimark/evaluate.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>

#include "epimark/figures.hpp"

namespace epimark {

namespace {

std::optional<std::optional<double>> numeric_key(const ResponseRecord& r) {
  if (!r.numeric_confidence) return std::nullopt;
  return r.numeric_confidence->value;
}

struct Partition {
  std::map<std::string, std::vector<ResponseRecord>> train;
  std::map<std::string, std::vector<ResponseRecord>> test;
  std::map<std::string, std::vector<ResponseRecord>> numeric;
  std::int64_t invalid_answers = 0;
};

Partition partition(std::span<const ResponseRecord> records) {
  Partition p;
  for (const auto& r : records) {
    if (!r.extracted_answer) throw DataError("record " + r.item.item_id + " has not been extracted");
    if (r.prompt_mode == PromptMode::numeric) {
      p.numeric[r.item.dataset_id].push_back(r);
      continue;
    }
    if (!r.marker) throw DataError("marker-mode record " + r.item.item_id + " has no marker");
    if (!r.answer_valid()) {
      ++p.invalid_answers;
      continue;
    }
    (r.item.split == Split::train ? p.train : p.test)[r.item.dataset_id].push_back(r);
  }
  return p;
}

metrics::Tables analysis_tables(const metrics::Tables& train, std::int64_t threshold, bool include_none) {
  metrics::Tables out;
  for (const auto& [id, t] : train) {
    auto f = metrics::filter_by_count(t, threshold);
    out[id] = include_none ? std::move(f) : metrics::without_none_marker(f);
  }
  return out;
}

void append(std::vector<Skip>& to, const std::vector<Skip>& from) { to.insert(to.end(), from.begin(), from.end()); }

}  // namespace

bool canonical_less(const ResponseRecord& a, const ResponseRecord& b) {
  const auto na = numeric_key(a);
  const auto nb = numeric_key(b);
  return std::tie(a.model_id, a.item, a.prompt_mode, a.raw_response, a.extracted_answer, a.correct, a.marker, na,
                  a.temperature) < std::tie(b.model_id, b.item, b.prompt_mode, b.raw_response, b.extracted_answer,
                                            b.correct, b.marker, nb, b.temperature);
}

std::vector<ResponseRecord> canonical_order(std::span<const ResponseRecord> records) {
  std::vector<ResponseRecord> out(records.begin(), records.end());
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

ModelEvaluation evaluate_model(std::span<const ResponseRecord> input, const EvaluateOptions& opt) {
  if (input.empty()) throw DataError("no records to evaluate");
  if (opt.threshold < 0) throw UsageError("threshold must be non-negative");
  const auto records = canonical_order(input);
  const std::string model_id = records.front().model_id;
  for (const auto& r : records)
    if (r.model_id != model_id) throw DataError("evaluate_model input mixes models");

  ModelEvaluation ev;
  MetricReport& rep = ev.report;
  rep.model_id = model_id;
  rep.threshold = opt.threshold;

  Partition part = partition(records);
  if (part.invalid_answers > 0)
    rep.warnings.push_back(fmt::format("{} marker-mode records without a valid answer were excluded",
                                       part.invalid_answers));

  metrics::MetricGrid grid;
  for (const auto& [id, recs] : part.train) {
    ev.train_tables[id] = metrics::marker_confidence_table(recs, opt.interval_level);
    std::int64_t correct = 0;
    for (const auto& r : recs) correct += *r.correct ? 1 : 0;
    rep.accuracies[id] = static_cast<double>(correct) / static_cast<double>(recs.size());
  }
  for (const auto& [id, recs] : part.test)
    if (!ev.train_tables.contains(id)) rep.skipped.push_back({"dataset " + id, "no training records"});
  if (!rep.accuracies.empty()) {
    double sum = 0.0;
    for (const auto& [id, a] : rep.accuracies) sum += a;
    rep.mean_accuracy = sum / static_cast<double>(rep.accuracies.size());
  }

  grid.tables = ev.train_tables;
  grid.test_records = std::move(part.test);
  grid.numeric_records = std::move(part.numeric);
  grid.accuracies = rep.accuracies;
  metrics::compute_ece_pairs(grid, opt.bins, &rep.skipped);
  ev.ece = metrics::aggregate_ece(grid, opt.bins);
  append(rep.skipped, ev.ece.skipped);
  rep.i_avg_ece = ev.ece.i_avg_ece;
  rep.c_avg_ece = ev.ece.c_avg_ece;
  rep.num_ece = ev.ece.num_ece;

  double coverage_sum = 0.0;
  for (const auto& [key, pair] : grid.ece_pairs) {
    rep.per_dataset_ece.push_back(pair);
    coverage_sum += pair.coverage;
    if (pair.coverage < opt.coverage_floor)
      rep.warnings.push_back(fmt::format("ece pair {}->{} coverage {:.4f} is below {:.4f}", key.first, key.second,
                                         pair.coverage, opt.coverage_floor));
  }
  if (!grid.ece_pairs.empty()) rep.coverage = coverage_sum / static_cast<double>(grid.ece_pairs.size());

  ev.analysis_tables = analysis_tables(ev.train_tables, opt.threshold, opt.include_none_marker);
  ev.c_avg_cv = metrics::c_avg_cv(ev.analysis_tables);
  ev.mac = metrics::mac(ev.analysis_tables, rep.accuracies);
  ev.mrc = metrics::mrc(ev.analysis_tables);
  ev.i_avg_cv = metrics::i_avg_cv(ev.analysis_tables);
  rep.c_avg_cv = ev.c_avg_cv.value;
  rep.mac = ev.mac.value;
  rep.mrc = ev.mrc.value;
  rep.i_avg_cv = ev.i_avg_cv.value;
  for (const auto* v : {&ev.c_avg_cv, &ev.mac, &ev.mrc, &ev.i_avg_cv}) append(rep.skipped, v->skipped);
  for (const auto& m : metrics::shared_markers(ev.analysis_tables)) rep.shared_markers.push_back(m.wire());

  std::vector<std::int64_t> sweep = opt.thresholds.empty() ? std::vector<std::int64_t>{opt.threshold} : opt.thresholds;
  for (auto t : sweep) {
    if (t < 0) throw UsageError("threshold must be non-negative");
    const auto tables = analysis_tables(ev.train_tables, t, opt.include_none_marker);
    ThresholdRow row;
    row.threshold = t;
    row.c_avg_cv = metrics::c_avg_cv(tables).value;
    row.mac = metrics::mac(tables, rep.accuracies).value;
    row.mrc = metrics::mrc(tables).value;
    row.i_avg_cv = metrics::i_avg_cv(tables).value;
    row.shared_markers = static_cast<std::int64_t>(metrics::shared_markers(tables).size());
    for (const auto& [id, table] : tables)
      row.markers_per_dataset[id] = static_cast<std::int64_t>(table.entries.size());
    rep.sweep.push_back(std::move(row));
  }

  for (const auto& [key, n] : figures::marker_diversity(records)) rep.marker_diversity[key.second] = n;
  return ev;
}

std::vector<ModelEvaluation> evaluate_all(std::span<const ResponseRecord> records, const EvaluateOptions& options) {
  std::map<std::string, std::vector<ResponseRecord>> by_model;
  for (const auto& r : records) by_model[r.model_id].push_back(r);
  std::vector<ModelEvaluation> out;
  for (const auto& [id, recs] : by_model) out.push_back(evaluate_model(recs, options));
  return out;
}

}  // namespace epimark
