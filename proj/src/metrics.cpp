#include "epimark/metrics.hpp"

#include <algorithm>
#include <set>

namespace epimark::metrics {

namespace {

void check_marker_record(const ResponseRecord& r) {
  if (r.prompt_mode != PromptMode::marker || !r.marker)
    throw DataError("record " + r.item.item_id + " is not an extracted marker-mode record");
  if (!r.answer_valid() || !r.correct) throw DataError("record " + r.item.item_id + " has no valid answer");
}

}  // namespace

ConfidenceTable marker_confidence_table(std::span<const ResponseRecord> records, double level) {
  ConfidenceTable table;
  if (records.empty()) return table;
  table.dataset_id = records.front().item.dataset_id;
  table.model_id = records.front().model_id;
  table.split = records.front().item.split;
  for (const auto& r : records) {
    if (r.item.dataset_id != table.dataset_id || r.model_id != table.model_id || r.item.split != table.split)
      throw DataError("confidence table input mixes datasets, models or splits");
    check_marker_record(r);
    auto& s = table.entries[*r.marker];
    ++s.count;
    if (*r.correct) ++s.correct;
  }
  for (auto& [marker, s] : table.entries) {
    s.confidence = static_cast<double>(s.correct) / static_cast<double>(s.count);
    s.interval = stats::binomial_interval(s.correct, s.count, level);
  }
  return table;
}

ConfidenceTable filter_by_count(const ConfidenceTable& table, std::int64_t threshold) {
  ConfidenceTable out = table;
  std::erase_if(out.entries, [&](const auto& e) { return e.second.count < threshold; });
  return out;
}

ConfidenceTable without_none_marker(const ConfidenceTable& table) {
  ConfidenceTable out = table;
  out.entries.erase(Marker::none());
  return out;
}

Transfer ece_marker_transfer(const ConfidenceTable& train_table, std::span<const ResponseRecord> test_records,
                             stats::EceBins bins) {
  std::vector<stats::EceSample> samples;
  samples.reserve(test_records.size());
  for (const auto& r : test_records) {
    check_marker_record(r);
    if (auto c = train_table.confidence_of(*r.marker)) samples.push_back({*c, *r.correct});
  }
  const auto total = static_cast<std::int64_t>(test_records.size());
  if (samples.empty()) throw ZeroCoverageError(total);
  Transfer t;
  t.covered = static_cast<std::int64_t>(samples.size());
  t.total = total;
  t.coverage = static_cast<double>(t.covered) / static_cast<double>(total);
  t.ece = stats::ece(samples, bins);
  return t;
}

std::optional<double> numeric_ece(std::span<const ResponseRecord> records, stats::EceBins bins) {
  std::vector<stats::EceSample> samples;
  for (const auto& r : records) {
    if (r.prompt_mode != PromptMode::numeric || !r.numeric_confidence || !r.numeric_confidence->valid()) continue;
    if (!r.answer_valid() || !r.correct) continue;
    samples.push_back({*r.numeric_confidence->value, *r.correct});
  }
  if (samples.empty()) return std::nullopt;
  return stats::ece(samples, bins);
}

std::vector<std::string> MetricGrid::datasets() const {
  std::set<std::string> ids;
  for (const auto& [id, t] : tables) ids.insert(id);
  for (const auto& [key, p] : ece_pairs) {
    ids.insert(key.first);
    ids.insert(key.second);
  }
  return {ids.begin(), ids.end()};
}

void compute_ece_pairs(MetricGrid& grid, stats::EceBins bins, std::vector<Skip>* skipped) {
  auto skip = [&](std::string scope, std::string reason) {
    if (skipped) skipped->push_back({std::move(scope), std::move(reason)});
  };
  grid.ece_pairs.clear();
  for (const auto& [p, table] : grid.tables) {
    for (const auto& [q, unused] : grid.tables) {
      const std::string scope = "ece pair " + p + "->" + q;
      auto it = grid.test_records.find(q);
      if (it == grid.test_records.end() || it->second.empty()) {
        skip(scope, "no test records");
        continue;
      }
      try {
        const Transfer t = ece_marker_transfer(table, it->second, bins);
        grid.ece_pairs[{p, q}] = PairEce{p, q, t.ece, t.coverage};
      } catch (const ZeroCoverageError&) {
        skip(scope, "zero coverage");
      }
    }
  }
}

EceAggregate aggregate_ece(const MetricGrid& grid, stats::EceBins bins) {
  EceAggregate out;
  const auto ids = grid.datasets();
  const auto n = static_cast<std::int64_t>(ids.size());
  out.cross_pairs_expected = n * (n - 1);

  double in_sum = 0.0, cross_sum = 0.0;
  for (const auto& [key, pair] : grid.ece_pairs) {
    if (key.first == key.second) {
      in_sum += pair.ece;
      ++out.in_domain_pairs;
    } else {
      cross_sum += pair.ece;
      ++out.cross_pairs;
    }
  }
  if (out.in_domain_pairs > 0) out.i_avg_ece = in_sum / static_cast<double>(out.in_domain_pairs);
  else out.skipped.push_back({"i_avg_ece", "no in-domain pair evaluated"});

  if (n < 2) out.skipped.push_back({"c_avg_ece", "fewer than 2 datasets"});
  else if (out.cross_pairs == 0) out.skipped.push_back({"c_avg_ece", "no cross-domain pair evaluated"});
  else out.c_avg_ece = cross_sum / static_cast<double>(out.cross_pairs);

  double num_sum = 0.0;
  std::int64_t num_n = 0;
  for (const auto& [id, records] : grid.numeric_records) {
    if (auto e = numeric_ece(records, bins)) {
      num_sum += *e;
      ++num_n;
    } else {
      out.skipped.push_back({"num_ece dataset " + id, "no valid numeric confidence"});
    }
  }
  if (num_n > 0) out.num_ece = num_sum / static_cast<double>(num_n);
  return out;
}

std::vector<Marker> shared_markers(const Tables& tables) {
  if (tables.empty()) return {};
  std::vector<Marker> out;
  for (const auto& [marker, s] : tables.begin()->second.entries) {
    if (std::all_of(tables.begin(), tables.end(), [&](const auto& t) { return t.second.entries.contains(marker); }))
      out.push_back(marker);
  }
  return out;
}

namespace {

std::vector<double> confidences_of(const ConfidenceTable& t) {
  std::vector<double> v;
  for (const auto& [m, s] : t.entries) v.push_back(s.confidence);
  return v;
}

std::vector<double> across(const Tables& tables, const Marker& m) {
  std::vector<double> v;
  for (const auto& [id, t] : tables) v.push_back(t.entries.at(m).confidence);
  return v;
}

void finish(MetricValue& out, double sum) {
  if (out.used > 0) out.value = sum / static_cast<double>(out.used);
}

}  // namespace

MetricValue i_avg_cv(const Tables& tables) {
  MetricValue out;
  double sum = 0.0;
  for (const auto& [id, t] : tables) {
    ++out.enumerated;
    const std::string scope = "i_avg_cv dataset " + id;
    if (t.entries.size() < 2) {
      out.skipped.push_back({scope, "fewer than 2 markers"});
      continue;
    }
    try {
      sum += stats::cv(confidences_of(t));
      ++out.used;
    } catch (const DataError&) {
      out.skipped.push_back({scope, "zero mean confidence"});
    }
  }
  finish(out, sum);
  return out;
}

MetricValue c_avg_cv(const Tables& tables) {
  MetricValue out;
  if (tables.size() < 2) {
    out.skipped.push_back({"c_avg_cv", "fewer than 2 datasets"});
    return out;
  }
  double sum = 0.0;
  for (const auto& m : shared_markers(tables)) {
    ++out.enumerated;
    try {
      sum += stats::cv(across(tables, m));
      ++out.used;
    } catch (const DataError&) {
      out.skipped.push_back({"c_avg_cv marker " + m.wire(), "zero mean confidence"});
    }
  }
  if (out.enumerated == 0) out.skipped.push_back({"c_avg_cv", "no shared markers"});
  finish(out, sum);
  return out;
}

MetricValue mac(const Tables& tables, const std::map<std::string, double>& accuracies) {
  MetricValue out;
  if (tables.size() < 2) {
    out.skipped.push_back({"mac", "fewer than 2 datasets"});
    return out;
  }
  std::vector<double> acc;
  for (const auto& [id, t] : tables) {
    auto it = accuracies.find(id);
    if (it == accuracies.end()) throw DataError("no accuracy for dataset " + id);
    acc.push_back(it->second);
  }
  double sum = 0.0;
  for (const auto& m : shared_markers(tables)) {
    ++out.enumerated;
    try {
      sum += stats::pearson(across(tables, m), acc);
      ++out.used;
    } catch (const DataError&) {
      out.skipped.push_back({"mac marker " + m.wire(), "degenerate variance"});
    }
  }
  if (out.enumerated == 0) out.skipped.push_back({"mac", "no shared markers"});
  finish(out, sum);
  return out;
}

MetricValue mrc(const Tables& tables) {
  MetricValue out;
  if (tables.size() < 2) {
    out.skipped.push_back({"mrc", "fewer than 2 datasets"});
    return out;
  }
  double sum = 0.0;
  for (auto p = tables.begin(); p != tables.end(); ++p) {
    for (auto q = std::next(p); q != tables.end(); ++q) {
      ++out.enumerated;
      const std::string scope = "mrc pair " + p->first + "/" + q->first;
      std::vector<double> x, y;
      for (const auto& [m, s] : p->second.entries) {
        if (auto it = q->second.entries.find(m); it != q->second.entries.end()) {
          x.push_back(s.confidence);
          y.push_back(it->second.confidence);
        }
      }
      if (x.size() < 2) {
        out.skipped.push_back({scope, "fewer than 2 shared markers"});
        continue;
      }
      try {
        sum += stats::spearman(x, y);
        ++out.used;
      } catch (const DataError&) {
        out.skipped.push_back({scope, "degenerate variance"});
      }
    }
  }
  finish(out, sum);
  return out;
}

CapabilityCorrelation capability_correlation(std::span<const ModelSummary> models) {
  if (models.size() < 3) throw DataError("capability correlation needs at least 3 models");
  std::vector<double> acc, cv, rc;
  for (const auto& m : models) {
    acc.push_back(m.mean_accuracy);
    cv.push_back(m.c_avg_cv);
    rc.push_back(m.mrc);
  }
  return {stats::pearson(acc, cv), stats::pearson(acc, rc)};
}

std::map<std::string, double> dataset_avg_in_domain_ece(
    const std::map<std::pair<std::string, std::string>, double>& runs) {
  std::map<std::string, std::pair<double, std::int64_t>> acc;
  for (const auto& [key, e] : runs) {
    auto& [sum, n] = acc[key.second];
    sum += e;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [id, sn] : acc) out[id] = sn.first / static_cast<double>(sn.second);
  return out;
}

}  // namespace epimark::metrics
