#include "epimark/figures.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "epimark/rng.hpp"
#include "epimark/stats.hpp"

namespace epimark::figures {

Heatmap heatmap_matrix(const metrics::Tables& tables, std::span<const Marker> markers) {
  Heatmap h;
  for (const auto& [id, t] : tables) h.datasets.push_back(id);
  for (const auto& m : markers) {
    h.markers.push_back(m.wire());
    auto& row = h.cells.emplace_back();
    for (const auto& [id, t] : tables) row.push_back(t.confidence_of(m));
  }
  return h;
}

std::vector<Marker> select_markers(const metrics::Tables& tables, std::size_t k, std::uint64_t seed) {
  auto shared = metrics::shared_markers(tables);
  std::mt19937_64 rng(derive_seed(seed, "heatmap"));
  stable_shuffle(std::span<Marker>(shared), rng);
  shared.erase(shared.begin() + static_cast<std::ptrdiff_t>(std::min(k, shared.size())), shared.end());
  std::sort(shared.begin(), shared.end());
  return shared;
}

std::map<std::string, std::vector<RankedMarker>> ranking_table(const metrics::Tables& tables) {
  std::map<std::string, std::vector<RankedMarker>> out;
  for (const auto& [id, t] : tables) {
    std::vector<double> negated;
    auto& rows = out[id];
    for (const auto& [m, s] : t.entries) {
      rows.push_back({m, s.confidence, 0.0});
      negated.push_back(-s.confidence);
    }
    const auto ranks = stats::average_ranks(negated);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = ranks[i];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RankedMarker& a, const RankedMarker& b) { return a.confidence > b.confidence; });
  }
  return out;
}

std::map<std::pair<std::string, std::string>, std::int64_t> marker_diversity(std::span<const ResponseRecord> records,
                                                                             bool include_none_marker) {
  std::map<std::pair<std::string, std::string>, std::set<Marker>> seen;
  for (const auto& r : records) {
    if (r.prompt_mode != PromptMode::marker || !r.marker) continue;
    auto& markers = seen[{r.model_id, r.item.dataset_id}];
    const Marker m = r.marker->is_none() ? Marker::none() : Marker::from_text(r.marker->text());
    if (m.is_none() && !include_none_marker) continue;
    markers.insert(m);
  }
  std::map<std::pair<std::string, std::string>, std::int64_t> out;
  for (const auto& [key, markers] : seen) out[key] = static_cast<std::int64_t>(markers.size());
  return out;
}

}  // namespace epimark::figures
