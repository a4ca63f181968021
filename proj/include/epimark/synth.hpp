#pragma once

// Seeded synthetic response logs with planted marker accuracies.

#include <cstdint>
#include <string>
#include <vector>

#include "epimark/core.hpp"

namespace epimark::synth {

struct PlantedMarker {
  std::string text;
  double accuracy = 0.0;  // in [0,1]
  double weight = 0.0;    // emission probability
};

struct SyntheticProfile {
  std::vector<PlantedMarker> markers;
  std::vector<std::string> datasets;
  std::vector<double> shifts;  // per dataset, added to every accuracy; empty means no shift
  std::uint64_t seed = 0;
  std::int64_t n_records = 5000;  // per dataset and split
  std::string model_id = "synthetic";
  bool numeric = false;  // also emit numeric-mode records
};

/// Throws UsageError unless weights sum to 1 (within 1e-9), accuracies lie in
/// [0,1], shifts match the datasets and n_records is positive.
void validate_profile(const SyntheticProfile& profile);

struct SyntheticRun {
  std::vector<QAItem> items;
  std::vector<ResponseRecord> records;
};

/// For every dataset and split, n_records binary items, each answered once
/// per prompt mode. A marker-mode record draws its marker by weight and its
/// correctness at the marker's accuracy plus the dataset shift (clamped).
/// A numeric-mode record states that same probability as its confidence.
/// Each (dataset, split) draws from its own seeded stream.
SyntheticRun generate_synthetic(const SyntheticProfile& profile);

/// The profile used by the closed-loop checks: eight markers over
/// `datasets` with all shifts zero.
SyntheticProfile reference_profile(std::vector<std::string> datasets, std::uint64_t seed);

}  // namespace epimark::synth
