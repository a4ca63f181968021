#include "epimark/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>

#include "epimark/rng.hpp"

namespace epimark::ingest {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RawRow {
  std::size_t line = 0;
  json value;
};

std::vector<RawRow> read_raw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open raw dataset file " + path.string());
  std::vector<RawRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back({lineno, json::parse(line)});
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
  }
  return rows;
}

[[noreturn]] void malformed(const fs::path& file, const RawRow& row, const std::string& what) {
  throw DataError(file.string() + ":" + std::to_string(row.line) + ": " + what);
}

std::string str_field(const fs::path& file, const RawRow& row, const char* key) {
  auto it = row.value.find(key);
  if (it == row.value.end() || !it->is_string()) malformed(file, row, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::int64_t int_field(const fs::path& file, const RawRow& row, const char* key) {
  auto it = row.value.find(key);
  if (it != row.value.end()) {
    if (it->is_number_integer()) return it->get<std::int64_t>();
    if (it->is_string()) {
      const auto s = it->get<std::string>();
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec == std::errc{} && p == s.data() + s.size()) return v;
    }
  }
  malformed(file, row, std::string("missing integer field '") + key + "'");
}

bool bool_field(const fs::path& file, const RawRow& row, const char* key) {
  auto it = row.value.find(key);
  if (it == row.value.end()) malformed(file, row, std::string("missing field '") + key + "'");
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_string()) {
    auto s = canonicalize_marker_text(it->get<std::string>());
    if (s == "true" || s == "yes") return true;
    if (s == "false" || s == "no") return false;
  }
  malformed(file, row, std::string("field '") + key + "' is not boolean");
}

std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

std::string item_id_for(const RawRow& row, Split split, std::size_t index, const char* id_key) {
  if (id_key != nullptr) {
    auto it = row.value.find(id_key);
    if (it != row.value.end() && it->is_string() && !it->get<std::string>().empty())
      return it->get<std::string>();
  }
  return std::string(to_string(split)) + "-" + std::to_string(index);
}

QAItem make_mcq(std::string dataset, Split split, std::string id, std::string question,
                std::vector<std::string> choices, std::size_t gold_index) {
  QAItem item;
  item.dataset_id = std::move(dataset);
  item.split = split;
  item.item_id = std::move(id);
  item.question_type = QuestionType::multiple_choice;
  item.question_text = std::move(question);
  for (std::size_t i = 0; i < choices.size(); ++i) item.options.push_back({letter(i), std::move(choices[i])});
  item.gold_answer = letter(gold_index);
  return item;
}

QAItem make_binary(std::string dataset, Split split, std::string id, std::string question, bool answer) {
  QAItem item;
  item.dataset_id = std::move(dataset);
  item.split = split;
  item.item_id = std::move(id);
  item.question_type = QuestionType::binary;
  item.question_text = std::move(question);
  item.gold_answer = answer ? "yes" : "no";
  return item;
}

// Adapters: one raw row -> one item (or nothing when the row is filtered out).
std::optional<QAItem> adapt_row(const std::string& dataset, const fs::path& file, const RawRow& row,
                                Split split, std::size_t index, std::uint64_t seed) {
  if (dataset == "boolq") {
    return make_binary(dataset, split, item_id_for(row, split, index, nullptr), str_field(file, row, "question"),
                       bool_field(file, row, "answer"));
  }
  if (dataset == "strategyqa") {
    return make_binary(dataset, split, item_id_for(row, split, index, "qid"), str_field(file, row, "question"),
                       bool_field(file, row, "answer"));
  }
  if (dataset == "gsm8k") {
    Gsm8kRaw raw{str_field(file, row, "question"), 0};
    try {
      raw.gold = parse_gsm8k_gold(str_field(file, row, "answer"));
    } catch (const DataError& e) {
      malformed(file, row, e.what());
    }
    QAItem item = binarize_gsm8k(raw, index, seed);
    item.split = split;
    item.item_id = item_id_for(row, split, index, nullptr);
    return item;
  }
  if (dataset == "mmlu") {
    auto it = row.value.find("choices");
    if (it == row.value.end() || !it->is_array() || it->size() < 2) malformed(file, row, "missing 'choices' array");
    auto choices = it->get<std::vector<std::string>>();
    std::size_t gold = 0;
    auto ans = row.value.find("answer");
    if (ans != row.value.end() && ans->is_string() && ans->get<std::string>().size() == 1 &&
        std::isupper(static_cast<unsigned char>(ans->get<std::string>()[0]))) {
      gold = static_cast<std::size_t>(ans->get<std::string>()[0] - 'A');
    } else {
      gold = static_cast<std::size_t>(int_field(file, row, "answer"));
    }
    if (gold >= choices.size()) malformed(file, row, "answer index out of range");
    return make_mcq(dataset, split, item_id_for(row, split, index, nullptr), str_field(file, row, "question"),
                    std::move(choices), gold);
  }
  if (dataset == "csqa") {
    auto it = row.value.find("choices");
    if (it == row.value.end() || !it->is_object()) malformed(file, row, "missing 'choices' object");
    auto labels = it->value("label", std::vector<std::string>{});
    auto texts = it->value("text", std::vector<std::string>{});
    if (labels.size() != texts.size() || labels.size() < 2) malformed(file, row, "inconsistent choices");
    const std::string key = str_field(file, row, "answerKey");
    auto pos = std::find(labels.begin(), labels.end(), key);
    if (pos == labels.end()) malformed(file, row, "answerKey is not a choice label");
    QAItem item;
    item.dataset_id = dataset;
    item.split = split;
    item.item_id = item_id_for(row, split, index, "id");
    item.question_type = QuestionType::multiple_choice;
    item.question_text = str_field(file, row, "question");
    for (std::size_t i = 0; i < labels.size(); ++i) item.options.push_back({labels[i], texts[i]});
    item.gold_answer = key;
    return item;
  }
  if (dataset == "medmcqa") {
    if (auto ct = row.value.find("choice_type"); ct != row.value.end() && ct->is_string() &&
                                                 ct->get<std::string>() != "single")
      return std::nullopt;
    std::vector<std::string> choices{str_field(file, row, "opa"), str_field(file, row, "opb"),
                                     str_field(file, row, "opc"), str_field(file, row, "opd")};
    auto cop = int_field(file, row, "cop");
    if (cop < 0 || cop > 3) malformed(file, row, "cop out of range (expected 0-based 0..3)");
    return make_mcq(dataset, split, item_id_for(row, split, index, "id"), str_field(file, row, "question"),
                    std::move(choices), static_cast<std::size_t>(cop));
  }
  if (dataset == "casehold") {
    std::vector<std::string> choices;
    for (int i = 0; i < 5; ++i) choices.push_back(str_field(file, row, ("holding_" + std::to_string(i)).c_str()));
    auto label = int_field(file, row, "label");
    if (label < 0 || label > 4) malformed(file, row, "label out of range");
    return make_mcq(dataset, split, std::to_string(index), str_field(file, row, "citing_prompt"),
                    std::move(choices), static_cast<std::size_t>(label));
  }
  throw DataError("unknown dataset_id '" + dataset + "'");
}

std::vector<QAItem> adapt_file(const std::string& dataset, const fs::path& file, Split split, std::uint64_t seed) {
  std::vector<QAItem> out;
  auto rows = read_raw(file);
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (auto item = adapt_row(dataset, file, rows[i], split, i, seed)) out.push_back(std::move(*item));
  return out;
}

// Seeded uniform sample of n items: shuffle positions, take the prefix, then
// restore source order so listings stay readable.
std::vector<QAItem> sample(std::vector<QAItem> items, std::size_t n, std::uint64_t seed, std::string_view label) {
  if (n == 0) return items;
  if (n > items.size())
    throw DataError(std::string(label) + ": sample size " + std::to_string(n) + " exceeds " +
                    std::to_string(items.size()) + " available items");
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, label));
  stable_shuffle(std::span(idx), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<QAItem> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(std::move(items[i]));
  return out;
}

fs::path split_file(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::exists(p)) throw DataError("expected " + p.string());
  return p;
}

}  // namespace

bool is_known_dataset(std::string_view id) {
  return std::find(std::begin(kDatasetIds), std::end(kDatasetIds), id) != std::end(kDatasetIds);
}

std::int64_t parse_gsm8k_gold(std::string_view field) {
  auto pos = field.rfind("####");
  if (pos == std::string_view::npos) throw DataError("gsm8k answer has no '####' gold marker");
  std::string digits;
  for (char c : field.substr(pos + 4)) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
    digits.push_back(c);
  }
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (digits.empty() || ec != std::errc{} || p != digits.data() + digits.size())
    throw DataError("gsm8k gold answer is not an integer: '" + digits + "'");
  return v;
}

std::string gsm8k_binary_question(std::string_view question, std::int64_t answer) {
  return "For the question `" + std::string(question) + "', is the answer " + std::to_string(answer) +
         " its correct answer?";
}

std::int64_t gsm8k_distractor(std::int64_t gold, std::size_t index, std::uint64_t seed) {
  std::mt19937_64 rng(mix64(seed ^ mix64(static_cast<std::uint64_t>(index))));
  const std::uint64_t span = 2 * static_cast<std::uint64_t>(gold < 0 ? -gold : gold) + 10;
  const auto magnitude = static_cast<std::int64_t>(1 + uniform_below(rng, span));
  const bool negative = (rng() & 1u) != 0;
  std::int64_t out = negative ? gold - magnitude : gold + magnitude;
  if (gold >= 0 && out < 0) out = gold + magnitude;
  return out;
}

QAItem binarize_gsm8k(const Gsm8kRaw& raw, std::size_t index, std::uint64_t seed,
                      std::optional<std::int64_t> planted_distractor) {
  const bool keep_gold = index % 2 == 0;
  std::int64_t shown = raw.gold;
  if (!keep_gold) {
    shown = planted_distractor ? *planted_distractor : gsm8k_distractor(raw.gold, index, seed);
    if (shown == raw.gold) throw DataError("gsm8k distractor equals the gold answer");
  }
  QAItem item;
  item.dataset_id = "gsm8k";
  item.split = Split::train;
  item.item_id = std::to_string(index);
  item.question_type = QuestionType::binary;
  item.question_text = gsm8k_binary_question(raw.question, shown);
  item.gold_answer = keep_gold ? "yes" : "no";
  return item;
}

PreparedDataset prepare_dataset(const DatasetSpec& spec) {
  const std::string& id = spec.dataset_id;
  if (!is_known_dataset(id)) throw DataError("unknown dataset_id '" + id + "'");

  PreparedDataset out;
  if (id == "casehold") {
    fs::path file = fs::is_directory(spec.source_path) ? split_file(spec.source_path, "all.jsonl") : spec.source_path;
    auto all = adapt_file(id, file, Split::train, spec.seed);
    const std::size_t n_train = all.size() * 8 / 10;
    for (std::size_t i = 0; i < all.size(); ++i) {
      all[i].split = i < n_train ? Split::train : Split::test;
      (i < n_train ? out.train : out.test).push_back(std::move(all[i]));
    }
  } else {
    if (!fs::is_directory(spec.source_path))
      throw DataError(id + ": source path must be a directory with train.jsonl and test.jsonl");
    out.train = adapt_file(id, split_file(spec.source_path, "train.jsonl"), Split::train,
                           derive_seed(spec.seed, id + "/train"));
    out.test = adapt_file(id, split_file(spec.source_path, "test.jsonl"), Split::test,
                          derive_seed(spec.seed, id + "/test"));
  }

  SampleSizes sizes;
  if (id == "mmlu") sizes = {20000, 0};
  if (id == "medmcqa") sizes = {9686, 2422};
  if (spec.sample_sizes) sizes = *spec.sample_sizes;
  out.train = sample(std::move(out.train), sizes.train_n, spec.seed, id + "/train");
  out.test = sample(std::move(out.test), sizes.test_n, spec.seed, id + "/test");

  std::set<std::string> train_ids;
  for (const auto& it : out.train) train_ids.insert(it.item_id);
  for (const auto& it : out.test)
    if (train_ids.contains(it.item_id))
      throw DataError(id + ": item id '" + it.item_id + "' appears in both train and test");
  return out;
}

}  // namespace epimark::ingest
