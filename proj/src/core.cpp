#include "epimark/core.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <set>

namespace epimark {

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// UTF-8 curly quotes and dashes that models wrap markers in.
constexpr std::array<std::string_view, 6> kWideEdgeChars = {
    "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C", "\xE2\x80\x9D",
    "\xE2\x80\x93", "\xE2\x80\x94"};

std::size_t edge_prefix(std::string_view s) {
  if (s.empty()) return 0;
  if (is_ascii_space(s.front()) || is_ascii_punct(s.front())) return 1;
  for (auto w : kWideEdgeChars)
    if (s.starts_with(w)) return w.size();
  return 0;
}

std::size_t edge_suffix(std::string_view s) {
  if (s.empty()) return 0;
  if (is_ascii_space(s.back()) || is_ascii_punct(s.back())) return 1;
  for (auto w : kWideEdgeChars)
    if (s.ends_with(w)) return w.size();
  return 0;
}

}  // namespace

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::string_view to_string(QuestionType t) {
  return t == QuestionType::binary ? "binary" : "multiple_choice";
}

std::string_view to_string(PromptMode m) { return m == PromptMode::marker ? "marker" : "numeric"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + std::string(s) + "'");
}

QuestionType parse_question_type(std::string_view s) {
  if (s == "binary") return QuestionType::binary;
  if (s == "multiple_choice") return QuestionType::multiple_choice;
  throw DataError("unknown question_type '" + std::string(s) + "'");
}

PromptMode parse_prompt_mode(std::string_view s) {
  if (s == "marker") return PromptMode::marker;
  if (s == "numeric") return PromptMode::numeric;
  throw DataError("unknown prompt_mode '" + std::string(s) + "'");
}

std::vector<std::string> validate_item(const QAItem& item) {
  std::vector<std::string> out;
  if (item.dataset_id.empty()) out.emplace_back("empty dataset_id");
  if (item.item_id.empty()) out.emplace_back("empty item_id");
  if (item.question_type == QuestionType::binary) {
    if (!item.options.empty()) out.emplace_back("binary item has options");
    if (item.gold_answer != "yes" && item.gold_answer != "no")
      out.emplace_back("binary gold answer not yes/no");
    return out;
  }
  if (item.options.size() < 2) out.emplace_back("fewer than two options");
  std::set<std::string> letters;
  for (const auto& o : item.options) {
    if (o.letter.empty()) out.emplace_back("empty option letter");
    if (!letters.insert(o.letter).second) out.emplace_back("duplicate option letter " + o.letter);
  }
  if (!letters.contains(item.gold_answer)) out.emplace_back("gold answer is not an option letter");
  return out;
}

// ---------------------------------------------------------------------------

std::string canonicalize_marker_text(std::string_view text) {
  std::string_view s = text;
  for (;;) {
    std::size_t n = edge_prefix(s);
    if (n == 0) break;
    s.remove_prefix(n);
  }
  for (;;) {
    std::size_t n = edge_suffix(s);
    if (n == 0) break;
    s.remove_suffix(n);
  }
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_ascii_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(ascii_lower(c));
  }
  return out;
}

Marker normalize_marker(std::string_view text) { return Marker::from_text(text); }

Marker Marker::from_text(std::string_view text) {
  Marker m;
  m.text_ = canonicalize_marker_text(text);
  m.none_ = m.text_.empty();
  return m;
}

std::string Marker::wire() const { return none_ ? std::string(kNoMarker) : text_; }

Marker Marker::from_wire(std::string_view wire) {
  if (wire == kNoMarker) return none();
  return from_text(wire);
}

// ---------------------------------------------------------------------------

bool answers_match(std::string_view extracted, std::string_view gold) {
  std::string a = canonicalize_marker_text(extracted);
  std::string b = canonicalize_marker_text(gold);
  return a == b;
}

std::vector<std::string> validate_record(const ResponseRecord& r, const QAItem& item) {
  std::vector<std::string> out;
  if (r.item.dataset_id != item.dataset_id || r.item.split != item.split ||
      r.item.item_id != item.item_id)
    out.emplace_back("item reference mismatch");
  if (r.model_id.empty()) out.emplace_back("empty model_id");
  if (!(r.temperature >= 0.0 && r.temperature <= 2.0)) out.emplace_back("temperature out of range");

  if (r.marker && r.numeric_confidence) {
    out.emplace_back("dual-channel populated");
  } else if (!r.marker && !r.numeric_confidence) {
    out.emplace_back("no confidence channel populated");
  } else if ((r.prompt_mode == PromptMode::marker) != r.marker.has_value()) {
    out.emplace_back("confidence channel does not match prompt_mode");
  }

  if (r.numeric_confidence && r.numeric_confidence->valid()) {
    double v = *r.numeric_confidence->value;
    if (!(v >= 0.0 && v <= 1.0)) out.emplace_back("confidence out of range");
  }
  if (r.marker) {
    if (!r.marker->is_none() &&
        (r.marker->text().empty() || canonicalize_marker_text(r.marker->text()) != r.marker->text()))
      out.emplace_back("marker not normalized");
  }

  if (!r.extracted_answer) {
    out.emplace_back("answer not extracted");
    if (r.correct) out.emplace_back("correct set without a valid answer");
    return out;
  }
  if (*r.extracted_answer == kInvalid) {
    if (r.correct) out.emplace_back("correct set without a valid answer");
    return out;
  }
  bool allowed = false;
  if (item.question_type == QuestionType::binary) {
    allowed = answers_match(*r.extracted_answer, "yes") || answers_match(*r.extracted_answer, "no");
  } else {
    for (const auto& o : item.options) allowed = allowed || answers_match(*r.extracted_answer, o.letter);
  }
  if (!allowed) out.emplace_back("answer not among item choices");
  if (!r.correct) {
    out.emplace_back("correct missing for a valid answer");
  } else if (*r.correct != answers_match(*r.extracted_answer, item.gold_answer)) {
    out.emplace_back("correctness mismatch");
  }
  return out;
}

// ---------------------------------------------------------------------------

std::int64_t ConfidenceTable::total_count() const {
  std::int64_t n = 0;
  for (const auto& [_, s] : entries) n += s.count;
  return n;
}

std::optional<double> ConfidenceTable::confidence_of(const Marker& m) const {
  auto it = entries.find(m);
  if (it == entries.end()) return std::nullopt;
  return it->second.confidence;
}

std::vector<std::string> validate_table(const ConfidenceTable& table) {
  std::vector<std::string> out;
  for (const auto& [m, s] : table.entries) {
    const std::string who = "marker '" + m.wire() + "': ";
    if (s.count < 0 || s.correct < 0) out.push_back(who + "negative count");
    if (s.correct > s.count) out.push_back(who + "correct exceeds count");
    if (s.count > 0 &&
        std::abs(s.confidence - static_cast<double>(s.correct) / static_cast<double>(s.count)) > 1e-12)
      out.push_back(who + "confidence is not correct/count");
    if (!(s.interval.lo <= s.confidence && s.confidence <= s.interval.hi))
      out.push_back(who + "interval does not contain confidence");
    if (s.interval.lo < 0.0 || s.interval.hi > 1.0) out.push_back(who + "interval outside [0,1]");
  }
  return out;
}

}  // namespace epimark
