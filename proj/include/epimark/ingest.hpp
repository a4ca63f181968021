#pragma once

// Benchmark adapters: read the published raw layouts of the seven QA
// datasets and emit closed-book train/test QAItem lists.
//
// Raw input is JSON-Lines. `source_path` is a directory holding
// `train.jsonl` and `test.jsonl` (the dataset's evaluation split saved under
// that name), except for CaseHOLD, which is a single file (or a directory
// with `all.jsonl`) split positionally.
//
//   boolq       {"question", "answer": bool}                  passage ignored
//   strategyqa  {"qid"?, "question", "answer": bool}
//   gsm8k       {"question", "answer": "... #### 72"}        binarized
//   mmlu        {"question", "choices": [..], "answer": int}  0-based index
//   csqa        {"id"?, "question", "choices": {"label", "text"}, "answerKey"}
//   medmcqa     {"id"?, "question", "opa".."opd", "cop": int, "choice_type"}
//   casehold    {"citing_prompt", "holding_0".."holding_4", "label"}

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "epimark/core.hpp"

namespace epimark::ingest {

inline constexpr std::string_view kDatasetIds[] = {"boolq", "strategyqa", "gsm8k", "mmlu",
                                                   "csqa",  "medmcqa",    "casehold"};

bool is_known_dataset(std::string_view id);

struct SampleSizes {
  std::size_t train_n = 0;
  std::size_t test_n = 0;
};

struct DatasetSpec {
  std::string dataset_id;
  std::filesystem::path source_path;
  std::uint64_t seed = 0;
  // Overrides the default sampling sizes (mmlu train 20000; medmcqa
  // 9686/2422). A zero entry keeps the whole split.
  std::optional<SampleSizes> sample_sizes;
};

struct PreparedDataset {
  std::vector<QAItem> train;
  std::vector<QAItem> test;
};

PreparedDataset prepare_dataset(const DatasetSpec& spec);

/// One raw GSM8K record: question text and the numeric gold answer.
struct Gsm8kRaw {
  std::string question;
  std::int64_t gold = 0;
};

/// Parses the "#### <number>" tail of a GSM8K answer field (commas allowed).
std::int64_t parse_gsm8k_gold(std::string_view answer_field);

/// Builds "For the question `Q', is the answer A its correct answer?".
std::string gsm8k_binary_question(std::string_view question, std::int64_t answer);

/// Seeded distractor: gold plus a nonzero offset drawn from +-[1, 2|gold|+10].
/// Never equals gold; never negative when gold is non-negative.
std::int64_t gsm8k_distractor(std::int64_t gold, std::size_t index, std::uint64_t seed);

/// Even index embeds the gold answer (gold "yes"); odd index embeds a
/// distractor (gold "no"). `planted_distractor` overrides the seeded draw.
QAItem binarize_gsm8k(const Gsm8kRaw& raw, std::size_t index, std::uint64_t seed,
                      std::optional<std::int64_t> planted_distractor = std::nullopt);

}  // namespace epimark::ingest
