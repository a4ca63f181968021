#pragma once

// Turns raw responses into answers, epistemic markers and numeric
// confidences.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epimark/core.hpp"

namespace epimark::elicit {
class Client;
}

namespace epimark::extract {

// ---------------------------------------------------------------------------
// Answers
// ---------------------------------------------------------------------------

/// Reads the answer from the leading clause of `raw` (falling back to the
/// first sentence when the clause holds no candidate). Returns "yes"/"no",
/// one of the item's option letters, or "INVALID" when nothing or more than
/// one distinct candidate is found.
std::string extract_answer(std::string_view raw, const QAItem& item);

// ---------------------------------------------------------------------------
// Markers
// ---------------------------------------------------------------------------

/// Hedge lexicon: phrases plus the modifier and negator words that may
/// extend a phrase to the left.
class Lexicon {
 public:
  /// Parses the sectioned text format of data/hedges.txt.
  static Lexicon parse(std::string_view text);
  static Lexicon load(const std::filesystem::path& path);
  /// The lexicon compiled in from data/hedges.txt.
  static const Lexicon& builtin();

  const std::vector<std::vector<std::string>>& hedges() const { return hedges_; }
  bool is_modifier(std::string_view w) const;
  bool is_negator(std::string_view w) const;

 private:
  std::vector<std::vector<std::string>> hedges_;  // tokenized phrases
  std::vector<std::string> modifiers_;
  std::vector<std::string> negators_;
};

/// Result of rule-based matching: the first hedge by position, plus every
/// other distinct hedge found (for diagnostics).
struct MarkerMatch {
  Marker marker = Marker::none();
  std::vector<std::string> others;
};

MarkerMatch match_markers(std::string_view raw, const Lexicon& lexicon);

enum class StrategyKind { rule_based, llm_assisted, hybrid };

StrategyKind parse_strategy(std::string_view s);
std::string_view to_string(StrategyKind k);

struct FewShotExample {
  std::string response;
  std::string marker;  // "NO_MARKER" for none
};

/// Default exemplars for the LLM-assisted extractor, including responses
/// without any marker.
std::span<const FewShotExample> default_few_shot();

std::string render_extraction_prompt(std::string_view raw, std::span<const FewShotExample> examples);

/// Maps the extractor model's reply to a marker ("none", "no marker" and
/// "NO_MARKER" map to the sentinel).
Marker parse_extractor_reply(std::string_view reply);

struct ExtractionStrategy {
  StrategyKind kind = StrategyKind::rule_based;
  const Lexicon* lexicon = nullptr;  // nullptr: builtin
  elicit::Client* client = nullptr;  // required for llm_assisted / hybrid
  std::string extractor_model;
  std::vector<FewShotExample> few_shot;  // empty: default_few_shot()
};

/// Exactly one marker per response (possibly NO_MARKER). Hybrid runs the
/// rules first and asks the extractor model only when they find nothing.
Marker extract_marker(std::string_view raw, const ExtractionStrategy& strategy);

// ---------------------------------------------------------------------------
// Numeric confidence
// ---------------------------------------------------------------------------

/// First number in [0,100] (a range "80-90" counts as its midpoint), divided
/// by 100. Numbers glued to letters ("B2", "3rd") are ignored, as is a
/// number equal to `answer_token`. Returns nullopt for INVALID.
std::optional<double> extract_numeric_confidence(std::string_view raw,
                                                 std::optional<std::string_view> answer_token = {});

/// The number embedded in a binarized GSM8K question, if any.
std::optional<std::string> embedded_gsm8k_answer(const QAItem& item);

// ---------------------------------------------------------------------------
// Whole records
// ---------------------------------------------------------------------------

struct Diagnostics {
  std::int64_t records = 0;
  std::int64_t invalid_answers = 0;
  std::int64_t no_marker = 0;
  std::int64_t multiple_hedges = 0;
  std::int64_t llm_fallbacks = 0;
  std::int64_t invalid_numeric = 0;
};

/// Fills the extraction fields of a raw record against its item.
ResponseRecord extract_record(const ResponseRecord& raw, const QAItem& item, const ExtractionStrategy& strategy,
                              Diagnostics* diagnostics = nullptr);

}  // namespace epimark::extract
