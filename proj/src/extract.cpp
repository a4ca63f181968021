#include "epimark/extract.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>

#include "epimark/elicit.hpp"
#include "epimark/json_io.hpp"

namespace epimark::extract {

extern const std::string_view kBuiltinLexiconText;

namespace {

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Curly apostrophe, as emitted by many chat models.
constexpr std::string_view kRightQuote = "\xE2\x80\x99";

struct Token {
  std::string text;  // lower-cased
  std::string original;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool break_before = false;  // punctuation separates it from the previous token
};

// Words are runs of letters/digits with inner apostrophes. Hyphens and
// whitespace separate words; any other punctuation also marks a break.
std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  bool pending_break = false;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (is_alpha(c) || is_digit(c)) {
      Token t;
      t.begin = i;
      t.break_before = pending_break;
      pending_break = false;
      while (i < s.size()) {
        if (is_alpha(s[i]) || is_digit(s[i])) {
          t.text.push_back(lower(s[i]));
          t.original.push_back(s[i]);
          ++i;
          continue;
        }
        // inner apostrophe: "i'm", "isn't"
        std::size_t qlen = s[i] == '\'' ? 1 : (s.substr(i).starts_with(kRightQuote) ? kRightQuote.size() : 0);
        if (qlen > 0 && i + qlen < s.size() && is_alpha(s[i + qlen]) && !t.text.empty()) {
          t.text.push_back('\'');
          t.original.push_back('\'');
          i += qlen;
          continue;
        }
        break;
      }
      t.end = i;
      out.push_back(std::move(t));
      continue;
    }
    if (!is_space(c) && c != '-') pending_break = true;
    ++i;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> words;
  for (auto& t : tokenize(phrase)) words.push_back(std::move(t.text));
  return words;
}

// End of the leading clause: the first clause delimiter.
std::size_t clause_end(std::string_view s) {
  static constexpr std::array<std::string_view, 3> kDashes = {"\xE2\x80\x94", "\xE2\x80\x93", " - "};
  std::size_t end = s.find_first_of(",;.!?\n");
  for (auto d : kDashes) end = std::min(end, s.find(d));
  return end == std::string_view::npos ? s.size() : end;
}

std::size_t sentence_end(std::string_view s) {
  std::size_t end = s.find_first_of(".!?\n");
  return end == std::string_view::npos ? s.size() : end;
}

std::set<std::string> answer_candidates(std::string_view raw, std::size_t limit, const QAItem& item) {
  std::set<std::string> found;
  const auto tokens = tokenize(raw.substr(0, limit));
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const Token& t = tokens[k];
    if (item.question_type == QuestionType::binary) {
      if (t.text == "yes" || t.text == "no") found.insert(t.text);
      continue;
    }
    if (t.original.size() != 1 || !is_alpha(t.original[0])) continue;
    const bool upper = t.original[0] >= 'A' && t.original[0] <= 'Z';
    if (!upper) {
      // A lone lower-case letter only counts as the leading answer token
      // ("b." / "c)"), never as an article inside a sentence.
      const char next = t.end < raw.size() ? raw[t.end] : '\0';
      if (k != 0 || !(next == '.' || next == ')' || next == ':' || next == '\0')) continue;
    }
    for (const auto& o : item.options)
      if (o.letter.size() == 1 && lower(o.letter[0]) == t.text[0]) found.insert(o.letter);
  }
  return found;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Answers
// ---------------------------------------------------------------------------

std::string extract_answer(std::string_view raw, const QAItem& item) {
  raw = trim(raw);
  auto found = answer_candidates(raw, clause_end(raw), item);
  if (found.empty()) found = answer_candidates(raw, sentence_end(raw), item);
  if (found.size() != 1) return std::string(kInvalid);
  return *found.begin();
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lex;
  enum class Section { none, hedges, modifiers, negators } section = Section::none;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    if (line == "[hedges]") {
      section = Section::hedges;
    } else if (line == "[modifiers]") {
      section = Section::modifiers;
    } else if (line == "[negators]") {
      section = Section::negators;
    } else {
      auto words = split_words(line);
      if (words.empty()) continue;
      switch (section) {
        case Section::hedges:
          lex.hedges_.push_back(std::move(words));
          break;
        case Section::modifiers:
        case Section::negators:
          if (words.size() != 1)
            throw DataError("lexicon line " + std::to_string(lineno) + ": modifiers and negators are single words");
          (section == Section::modifiers ? lex.modifiers_ : lex.negators_).push_back(words[0]);
          break;
        case Section::none:
          throw DataError("lexicon line " + std::to_string(lineno) + ": entry outside a section");
      }
    }
  }
  if (lex.hedges_.empty()) throw DataError("lexicon has no [hedges] entries");
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = parse(kBuiltinLexiconText);
  return lex;
}

bool Lexicon::is_modifier(std::string_view w) const {
  return std::find(modifiers_.begin(), modifiers_.end(), w) != modifiers_.end();
}

bool Lexicon::is_negator(std::string_view w) const {
  return std::find(negators_.begin(), negators_.end(), w) != negators_.end();
}

// ---------------------------------------------------------------------------
// Markers
// ---------------------------------------------------------------------------

MarkerMatch match_markers(std::string_view raw, const Lexicon& lexicon) {
  const auto tokens = tokenize(raw);
  struct Span {
    std::size_t first;
    std::size_t last;  // inclusive
  };
  std::vector<Span> spans;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& phrase : lexicon.hedges()) {
      if (i + phrase.size() > tokens.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < phrase.size() && ok; ++k)
        ok = tokens[i + k].text == phrase[k] && (k == 0 || !tokens[i + k].break_before);
      if (!ok) continue;
      Span s{i, i + phrase.size() - 1};
      while (s.first > 0 && !tokens[s.first].break_before && lexicon.is_modifier(tokens[s.first - 1].text)) --s.first;
      if (s.first > 0 && !tokens[s.first].break_before && lexicon.is_negator(tokens[s.first - 1].text)) --s.first;
      spans.push_back(s);
    }
  }
  MarkerMatch out;
  if (spans.empty()) return out;
  std::stable_sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.last > b.last;
  });
  auto text_of = [&](const Span& s) {
    std::string t;
    for (std::size_t k = s.first; k <= s.last; ++k) {
      if (k > s.first) t.push_back(' ');
      t += tokens[k].text;
    }
    return t;
  };
  out.marker = Marker::from_text(text_of(spans.front()));
  std::set<std::string> seen{out.marker.text()};
  std::size_t covered_to = spans.front().last;
  for (std::size_t k = 1; k < spans.size(); ++k) {
    // Sub-phrases of an accepted span ("likely" inside "very likely") are not
    // separate hedges.
    if (spans[k].first <= covered_to) continue;
    covered_to = std::max(covered_to, spans[k].last);
    auto t = text_of(spans[k]);
    if (seen.insert(t).second) out.others.push_back(std::move(t));
  }
  return out;
}

StrategyKind parse_strategy(std::string_view s) {
  if (s == "rule_based") return StrategyKind::rule_based;
  if (s == "llm_assisted") return StrategyKind::llm_assisted;
  if (s == "hybrid") return StrategyKind::hybrid;
  throw UsageError("unknown extraction strategy '" + std::string(s) + "'");
}

std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::rule_based:
      return "rule_based";
    case StrategyKind::llm_assisted:
      return "llm_assisted";
    case StrategyKind::hybrid:
      return "hybrid";
  }
  return "rule_based";
}

std::span<const FewShotExample> default_few_shot() {
  static const std::vector<FewShotExample> examples = {
      {"Yes, I'm fairly confident about that.", "fairly confident"},
      {"C. I think this is right, but I could be wrong.", "i think"},
      {"No.", "NO_MARKER"},
      {"B. It is highly unlikely to be anything else.", "highly unlikely"},
      {"Yes, the treaty was signed in 1648.", "NO_MARKER"},
      {"A - probably.", "probably"},
  };
  return examples;
}

std::string render_extraction_prompt(std::string_view raw, std::span<const FewShotExample> examples) {
  std::string out =
      "Identify the single epistemic marker (an expression of confidence or uncertainty such as "
      "\"very likely\" or \"not sure\") used in the response. Reply with the marker exactly as written, "
      "or NO_MARKER if the response expresses no confidence.\n\n";
  for (const auto& ex : examples) {
    out += "Response: " + ex.response + "\n";
    out += "Marker: " + ex.marker + "\n\n";
  }
  out += "Response: " + std::string(trim(raw)) + "\n";
  out += "Marker:";
  return out;
}

Marker parse_extractor_reply(std::string_view reply) {
  reply = trim(reply);
  reply = reply.substr(0, reply.find('\n'));
  if (reply.starts_with("Marker:")) reply.remove_prefix(7);
  if (trim(reply) == kNoMarker) return Marker::none();
  Marker m = Marker::from_text(reply);
  if (m.text() == "none" || m.text() == "no marker" || m.text() == "no_marker" || m.text() == "n/a")
    return Marker::none();
  return m;
}

namespace {

Marker ask_extractor(std::string_view raw, const ExtractionStrategy& strategy) {
  if (strategy.client == nullptr) throw UsageError("llm-assisted extraction needs an endpoint client");
  const auto examples = strategy.few_shot.empty() ? default_few_shot() : std::span<const FewShotExample>(strategy.few_shot);
  const std::string model = strategy.extractor_model.empty() ? strategy.client->config().model_id : strategy.extractor_model;
  const std::string reply = strategy.client->complete_prompt(render_extraction_prompt(raw, examples), model, 0.0, 16);
  return parse_extractor_reply(reply);
}

Marker extract_marker_impl(std::string_view raw, const ExtractionStrategy& strategy, Diagnostics* diag) {
  const Lexicon& lex = strategy.lexicon ? *strategy.lexicon : Lexicon::builtin();
  switch (strategy.kind) {
    case StrategyKind::rule_based: {
      auto m = match_markers(raw, lex);
      if (diag && !m.others.empty()) ++diag->multiple_hedges;
      return m.marker;
    }
    case StrategyKind::llm_assisted:
      return ask_extractor(raw, strategy);
    case StrategyKind::hybrid: {
      auto m = match_markers(raw, lex);
      if (diag && !m.others.empty()) ++diag->multiple_hedges;
      if (!m.marker.is_none()) return m.marker;
      if (diag) ++diag->llm_fallbacks;
      return ask_extractor(raw, strategy);
    }
  }
  return Marker::none();
}

}  // namespace

Marker extract_marker(std::string_view raw, const ExtractionStrategy& strategy) {
  return extract_marker_impl(raw, strategy, nullptr);
}

// ---------------------------------------------------------------------------
// Numeric confidence
// ---------------------------------------------------------------------------

std::optional<double> extract_numeric_confidence(std::string_view raw, std::optional<std::string_view> answer_token) {
  struct Number {
    double value;
    std::size_t begin;
    std::size_t end;
    std::string_view text;
  };
  std::vector<Number> numbers;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (!is_digit(raw[i])) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    while (i < raw.size() && is_digit(raw[i])) ++i;
    if (i + 1 < raw.size() && raw[i] == '.' && is_digit(raw[i + 1])) {
      ++i;
      while (i < raw.size() && is_digit(raw[i])) ++i;
    }
    const bool glued = (begin > 0 && (is_alpha(raw[begin - 1]) || raw[begin - 1] == '.')) ||
                       (i < raw.size() && is_alpha(raw[i]));
    if (glued) continue;
    double v = 0.0;
    auto [p, ec] = std::from_chars(raw.data() + begin, raw.data() + i, v);
    if (ec != std::errc{} || p != raw.data() + i) continue;
    numbers.push_back({v, begin, i, raw.substr(begin, i - begin)});
  }

  auto in_range = [](double v) { return v >= 0.0 && v <= 100.0; };
  for (std::size_t k = 0; k < numbers.size(); ++k) {
    const auto& n = numbers[k];
    if (answer_token && n.text == *answer_token) continue;
    if (!in_range(n.value)) continue;
    if (k + 1 < numbers.size()) {
      // "80-90", "80 - 90", "80–90": take the midpoint
      std::string_view gap = trim(raw.substr(n.end, numbers[k + 1].begin - n.end));
      if ((gap == "-" || gap == "\xE2\x80\x93" || gap == "to") && in_range(numbers[k + 1].value) &&
          numbers[k + 1].value >= n.value)
        return (n.value + numbers[k + 1].value) / 2.0 / 100.0;
    }
    return n.value / 100.0;
  }
  return std::nullopt;
}

std::optional<std::string> embedded_gsm8k_answer(const QAItem& item) {
  static constexpr std::string_view kLead = "', is the answer ";
  auto pos = item.question_text.rfind(kLead);
  if (pos == std::string::npos) return std::nullopt;
  std::string_view rest = std::string_view(item.question_text).substr(pos + kLead.size());
  auto sp = rest.find(' ');
  if (sp == std::string_view::npos) return std::nullopt;
  return std::string(rest.substr(0, sp));
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

ResponseRecord extract_record(const ResponseRecord& raw, const QAItem& item, const ExtractionStrategy& strategy,
                              Diagnostics* diag) {
  ResponseRecord r = raw;
  r.extracted_answer = extract_answer(raw.raw_response, item);
  r.correct.reset();
  if (r.answer_valid()) r.correct = answers_match(*r.extracted_answer, item.gold_answer);
  r.marker.reset();
  r.numeric_confidence.reset();
  if (raw.prompt_mode == PromptMode::marker) {
    r.marker = extract_marker_impl(raw.raw_response, strategy, diag);
    if (diag && r.marker->is_none()) ++diag->no_marker;
  } else {
    std::optional<std::string> skip;
    if (item.dataset_id == "gsm8k") skip = embedded_gsm8k_answer(item);
    auto v = extract_numeric_confidence(raw.raw_response,
                                        skip ? std::optional<std::string_view>(*skip) : std::nullopt);
    r.numeric_confidence = v ? NumericConfidence::of(*v) : NumericConfidence::invalid();
    if (diag && !v) ++diag->invalid_numeric;
  }
  if (diag) {
    ++diag->records;
    if (!r.answer_valid()) ++diag->invalid_answers;
  }
  return r;
}

}  // namespace epimark::extract
