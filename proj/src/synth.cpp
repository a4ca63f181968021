#include "epimark/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "epimark/rng.hpp"

namespace epimark::synth {

void validate_profile(const SyntheticProfile& p) {
  if (p.markers.empty()) throw UsageError("synthetic profile has no markers");
  if (p.datasets.empty()) throw UsageError("synthetic profile has no datasets");
  if (p.n_records < 1) throw UsageError("synthetic n_records must be positive");
  if (!p.shifts.empty() && p.shifts.size() != p.datasets.size())
    throw UsageError("synthetic profile needs one shift per dataset");
  double total = 0.0;
  for (const auto& m : p.markers) {
    if (Marker::from_text(m.text).is_none()) throw UsageError("synthetic marker text is empty");
    if (!(m.accuracy >= 0.0 && m.accuracy <= 1.0)) throw UsageError("planted accuracy outside [0,1]");
    if (!(m.weight >= 0.0)) throw UsageError("emission weight is negative");
    total += m.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("emission weights must sum to 1");
}

SyntheticRun generate_synthetic(const SyntheticProfile& p) {
  validate_profile(p);
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& m : p.markers) cumulative.push_back(acc += m.weight);

  SyntheticRun run;
  for (std::size_t d = 0; d < p.datasets.size(); ++d) {
    const std::string& dataset = p.datasets[d];
    const double shift = p.shifts.empty() ? 0.0 : p.shifts[d];
    for (Split split : {Split::train, Split::test}) {
      std::mt19937_64 rng(derive_seed(p.seed, dataset + "/" + std::string(to_string(split))));
      for (std::int64_t i = 0; i < p.n_records; ++i) {
        QAItem item;
        item.dataset_id = dataset;
        item.split = split;
        item.item_id = fmt::format("{}-{}", to_string(split), i);
        item.question_type = QuestionType::binary;
        item.question_text = fmt::format("Synthetic question {} of {}?", i, dataset);
        item.gold_answer = "yes";
        run.items.push_back(item);

        const double u = uniform01(rng) * acc;
        const auto k = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(p.markers.size()) - 1));
        const double prob = std::clamp(p.markers[k].accuracy + shift, 0.0, 1.0);
        const Marker marker = Marker::from_text(p.markers[k].text);

        auto emit = [&](PromptMode mode) {
          const bool correct = uniform01(rng) < prob;
          ResponseRecord r;
          r.item = {dataset, split, item.item_id};
          r.model_id = p.model_id;
          r.prompt_mode = mode;
          r.extracted_answer = correct ? "yes" : "no";
          r.correct = correct;
          if (mode == PromptMode::marker) {
            r.raw_response = fmt::format("{}, {}.", correct ? "Yes" : "No", marker.text());
            r.marker = marker;
          } else {
            r.raw_response = fmt::format("{}, {}%.", correct ? "Yes" : "No", std::lround(prob * 100.0));
            r.numeric_confidence = NumericConfidence::of(prob);
          }
          run.records.push_back(std::move(r));
        };
        emit(PromptMode::marker);
        if (p.numeric) emit(PromptMode::numeric);
      }
    }
  }
  return run;
}

SyntheticProfile reference_profile(std::vector<std::string> datasets, std::uint64_t seed) {
  SyntheticProfile p;
  p.markers = {
      {"almost certain", 0.95, 0.20}, {"very likely", 0.92, 0.15}, {"highly confident", 0.90, 0.15},
      {"likely", 0.85, 0.15},         {"fairly sure", 0.80, 0.10}, {"probably", 0.75, 0.10},
      {"i think", 0.70, 0.10},        {"not sure", 0.60, 0.05},
  };
  p.datasets = std::move(datasets);
  p.seed = seed;
  return p;
}

}  // namespace epimark::synth
