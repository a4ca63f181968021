#pragma once

// Shared data model: QA items, model responses, markers and the per-marker
// confidence tables computed from them.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace epimark {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base for every error raised by the library. `exit_code()` is what the CLI
/// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 2; }
};

/// Malformed input, failed precondition on data, degenerate statistics.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Bad command-line usage or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Split { train, test };
enum class QuestionType { binary, multiple_choice };
enum class PromptMode { marker, numeric };

std::string_view to_string(Split s);
std::string_view to_string(QuestionType t);
std::string_view to_string(PromptMode m);
Split parse_split(std::string_view s);
QuestionType parse_question_type(std::string_view s);
PromptMode parse_prompt_mode(std::string_view s);

/// Sentinel used on the wire for an answer or numeric confidence that could
/// not be parsed from the response.
inline constexpr std::string_view kInvalid = "INVALID";

/// Wire form of the no-marker sentinel. Canonical marker text is always
/// lower-case, so this never collides with a real marker.
inline constexpr std::string_view kNoMarker = "NO_MARKER";

// ---------------------------------------------------------------------------
// QAItem
// ---------------------------------------------------------------------------

struct Option {
  std::string letter;
  std::string text;
  friend bool operator==(const Option&, const Option&) = default;
};

struct QAItem {
  std::string dataset_id;
  Split split = Split::train;
  std::string item_id;
  QuestionType question_type = QuestionType::binary;
  std::string question_text;
  std::vector<Option> options;  // empty for binary items
  std::string gold_answer;      // "yes"/"no" or an option letter

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

/// Returns every invariant violation of the item (empty when valid).
std::vector<std::string> validate_item(const QAItem& item);

// ---------------------------------------------------------------------------
// Marker
// ---------------------------------------------------------------------------

/// An epistemic marker in canonical form, or the NO_MARKER sentinel.
class Marker {
 public:
  /// The sentinel grouping every response that carries no hedge.
  static Marker none() { return Marker{}; }

  /// Normalizes `text`; empty-after-normalization yields `none()`.
  static Marker from_text(std::string_view text);

  bool is_none() const { return none_; }
  const std::string& text() const { return text_; }

  /// Canonical text, or "NO_MARKER" for the sentinel.
  std::string wire() const;
  static Marker from_wire(std::string_view wire);

  friend auto operator<=>(const Marker&, const Marker&) = default;
  friend bool operator==(const Marker&, const Marker&) = default;

 private:
  Marker() = default;
  bool none_ = true;
  std::string text_;
};

/// Lower-case, trim, collapse internal whitespace, strip leading and trailing
/// punctuation. Idempotent.
std::string canonicalize_marker_text(std::string_view text);

/// Marker normalization; empty-after-normalization becomes NO_MARKER.
Marker normalize_marker(std::string_view text);

// ---------------------------------------------------------------------------
// ResponseRecord
// ---------------------------------------------------------------------------

struct ItemRef {
  std::string dataset_id;
  Split split = Split::train;
  std::string item_id;
  friend auto operator<=>(const ItemRef&, const ItemRef&) = default;
  friend bool operator==(const ItemRef&, const ItemRef&) = default;
};

/// A numeric confidence channel value: a fraction in [0,1] or INVALID.
struct NumericConfidence {
  std::optional<double> value;  // nullopt == INVALID

  static NumericConfidence invalid() { return {}; }
  static NumericConfidence of(double v) { return {v}; }
  bool valid() const { return value.has_value(); }
  friend bool operator==(const NumericConfidence&, const NumericConfidence&) = default;
};

struct ResponseRecord {
  ItemRef item;
  std::string model_id;
  PromptMode prompt_mode = PromptMode::marker;
  std::string raw_response;
  // nullopt: extraction has not run yet. "INVALID": no parseable answer.
  std::optional<std::string> extracted_answer;
  std::optional<bool> correct;  // set only when the answer is valid
  std::optional<Marker> marker;  // marker mode only
  std::optional<NumericConfidence> numeric_confidence;  // numeric mode only
  double temperature = 0.5;

  /// True when an answer was extracted and it is not INVALID.
  bool answer_valid() const {
    return extracted_answer.has_value() && *extracted_answer != kInvalid;
  }

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

/// Returns every invariant violation of `record` against `item`; never throws
/// for data problems. Messages are stable strings usable in tests.
std::vector<std::string> validate_record(const ResponseRecord& record, const QAItem& item);

/// Case-insensitive comparison of an extracted answer token with a gold answer.
bool answers_match(std::string_view extracted, std::string_view gold);

// ---------------------------------------------------------------------------
// ConfidenceTable
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct MarkerStats {
  std::int64_t count = 0;
  std::int64_t correct = 0;
  double confidence = 0.0;
  Interval interval;
  friend bool operator==(const MarkerStats&, const MarkerStats&) = default;
};

struct ConfidenceTable {
  std::string dataset_id;
  std::string model_id;
  Split split = Split::train;
  std::map<Marker, MarkerStats> entries;

  std::int64_t total_count() const;
  std::optional<double> confidence_of(const Marker& m) const;

  friend bool operator==(const ConfidenceTable&, const ConfidenceTable&) = default;
};

/// Checks the table invariants: correct <= count, confidence = correct/count,
/// lo <= confidence <= hi.
std::vector<std::string> validate_table(const ConfidenceTable& table);

// ---------------------------------------------------------------------------
// MetricReport
// ---------------------------------------------------------------------------

struct PairEce {
  std::string train_dataset;
  std::string test_dataset;
  double ece = 0.0;
  double coverage = 0.0;
  friend bool operator==(const PairEce&, const PairEce&) = default;
};

/// Something a metric had to leave out, and why.
struct Skip {
  std::string scope;   // e.g. "mrc pair boolq/csqa", "mac marker likely"
  std::string reason;
  friend bool operator==(const Skip&, const Skip&) = default;
};

/// The four marker-analysis metrics recomputed at one filtering threshold.
struct ThresholdRow {
  std::int64_t threshold = 0;
  std::optional<double> c_avg_cv;
  std::optional<double> mac;
  std::optional<double> mrc;
  std::optional<double> i_avg_cv;
  std::int64_t shared_markers = 0;
  std::map<std::string, std::int64_t> markers_per_dataset;
  friend bool operator==(const ThresholdRow&, const ThresholdRow&) = default;
};

struct MetricReport {
  std::string model_id;
  std::int64_t threshold = 10;
  std::optional<double> i_avg_ece;
  std::optional<double> c_avg_ece;
  std::optional<double> num_ece;
  std::optional<double> c_avg_cv;
  std::optional<double> mac;
  std::optional<double> mrc;
  std::optional<double> i_avg_cv;
  std::vector<PairEce> per_dataset_ece;
  std::vector<std::string> shared_markers;
  std::vector<Skip> skipped;
  double coverage = 0.0;
  std::map<std::string, double> accuracies;
  double mean_accuracy = 0.0;
  std::map<std::string, std::int64_t> marker_diversity;
  std::vector<ThresholdRow> sweep;
  std::vector<std::string> warnings;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

}  // namespace epimark
