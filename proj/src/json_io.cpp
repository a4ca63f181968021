#include "epimark/json_io.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>

namespace epimark {

namespace {

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

template <class T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  if (v)
    j[key] = *v;
  else
    j[key] = nullptr;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing key '") + key + "'");
  return *it;
}

}  // namespace

// ---------------------------------------------------------------------------

void to_json(json& j, const QAItem& item) {
  json options = json::array();
  for (const auto& o : item.options) options.push_back({{"letter", o.letter}, {"text", o.text}});
  j = json{{"dataset_id", item.dataset_id},
           {"split", to_string(item.split)},
           {"item_id", item.item_id},
           {"question_type", to_string(item.question_type)},
           {"question_text", item.question_text},
           {"options", std::move(options)},
           {"gold_answer", item.gold_answer}};
}

void from_json(const json& j, QAItem& item) {
  item.dataset_id = require(j, "dataset_id").get<std::string>();
  item.split = parse_split(require(j, "split").get<std::string>());
  item.item_id = require(j, "item_id").get<std::string>();
  item.question_type = parse_question_type(require(j, "question_type").get<std::string>());
  item.question_text = require(j, "question_text").get<std::string>();
  item.options.clear();
  if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
    for (const auto& o : *it)
      item.options.push_back({require(o, "letter").get<std::string>(), require(o, "text").get<std::string>()});
  }
  item.gold_answer = require(j, "gold_answer").get<std::string>();
}

void to_json(json& j, const ResponseRecord& r) {
  j = json::object();
  j["dataset_id"] = r.item.dataset_id;
  j["split"] = to_string(r.item.split);
  j["item_id"] = r.item.item_id;
  j["model_id"] = r.model_id;
  j["prompt_mode"] = to_string(r.prompt_mode);
  j["raw_response"] = r.raw_response;
  put_opt(j, "extracted_answer", r.extracted_answer);
  put_opt(j, "correct", r.correct);
  if (r.marker)
    j["marker"] = r.marker->wire();
  else
    j["marker"] = nullptr;
  if (!r.numeric_confidence)
    j["numeric_confidence"] = nullptr;
  else if (r.numeric_confidence->valid())
    j["numeric_confidence"] = *r.numeric_confidence->value;
  else
    j["numeric_confidence"] = kInvalid;
  j["temperature"] = r.temperature;
}

void from_json(const json& j, ResponseRecord& r) {
  r.item.dataset_id = require(j, "dataset_id").get<std::string>();
  r.item.split = parse_split(require(j, "split").get<std::string>());
  r.item.item_id = require(j, "item_id").get<std::string>();
  r.model_id = require(j, "model_id").get<std::string>();
  r.prompt_mode = parse_prompt_mode(require(j, "prompt_mode").get<std::string>());
  r.raw_response = require(j, "raw_response").get<std::string>();
  r.extracted_answer = opt_get<std::string>(j, "extracted_answer");
  r.correct = opt_get<bool>(j, "correct");
  if (auto m = opt_get<std::string>(j, "marker"))
    r.marker = Marker::from_wire(*m);
  else
    r.marker.reset();
  r.numeric_confidence.reset();
  if (auto it = j.find("numeric_confidence"); it != j.end() && !it->is_null()) {
    if (it->is_string()) {
      if (it->get<std::string>() != kInvalid) throw DataError("numeric_confidence must be a number, INVALID or null");
      r.numeric_confidence = NumericConfidence::invalid();
    } else {
      r.numeric_confidence = NumericConfidence::of(it->get<double>());
    }
  }
  r.temperature = require(j, "temperature").get<double>();
}

void to_json(json& j, const ConfidenceTable& t) {
  json entries = json::array();
  for (const auto& [m, s] : t.entries)
    entries.push_back({{"marker", m.wire()},
                       {"count", s.count},
                       {"correct", s.correct},
                       {"confidence", s.confidence},
                       {"lo", s.interval.lo},
                       {"hi", s.interval.hi}});
  j = json{{"dataset_id", t.dataset_id},
           {"model_id", t.model_id},
           {"split", to_string(t.split)},
           {"entries", std::move(entries)}};
}

void from_json(const json& j, ConfidenceTable& t) {
  t.dataset_id = require(j, "dataset_id").get<std::string>();
  t.model_id = require(j, "model_id").get<std::string>();
  t.split = parse_split(require(j, "split").get<std::string>());
  t.entries.clear();
  for (const auto& e : require(j, "entries")) {
    MarkerStats s;
    s.count = require(e, "count").get<std::int64_t>();
    s.correct = require(e, "correct").get<std::int64_t>();
    s.confidence = require(e, "confidence").get<double>();
    s.interval = {require(e, "lo").get<double>(), require(e, "hi").get<double>()};
    t.entries.emplace(Marker::from_wire(require(e, "marker").get<std::string>()), s);
  }
}

void to_json(json& j, const MetricReport& r) {
  j = json::object();
  j["model_id"] = r.model_id;
  j["threshold"] = r.threshold;
  put_opt(j, "i_avg_ece", r.i_avg_ece);
  put_opt(j, "c_avg_ece", r.c_avg_ece);
  put_opt(j, "num_ece", r.num_ece);
  put_opt(j, "c_avg_cv", r.c_avg_cv);
  put_opt(j, "mac", r.mac);
  put_opt(j, "mrc", r.mrc);
  put_opt(j, "i_avg_cv", r.i_avg_cv);
  json pairs = json::array();
  for (const auto& p : r.per_dataset_ece)
    pairs.push_back({{"train", p.train_dataset}, {"test", p.test_dataset}, {"ece", p.ece}, {"coverage", p.coverage}});
  j["per_dataset_ece"] = std::move(pairs);
  j["shared_markers"] = r.shared_markers;
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"scope", s.scope}, {"reason", s.reason}});
  j["skipped"] = std::move(skipped);
  j["coverage"] = r.coverage;
  j["accuracies"] = r.accuracies;
  j["mean_accuracy"] = r.mean_accuracy;
  j["marker_diversity"] = r.marker_diversity;
  json sweep = json::array();
  for (const auto& row : r.sweep) {
    json o = json::object();
    o["threshold"] = row.threshold;
    put_opt(o, "c_avg_cv", row.c_avg_cv);
    put_opt(o, "mac", row.mac);
    put_opt(o, "mrc", row.mrc);
    put_opt(o, "i_avg_cv", row.i_avg_cv);
    o["shared_markers"] = row.shared_markers;
    o["markers_per_dataset"] = row.markers_per_dataset;
    sweep.push_back(std::move(o));
  }
  j["sweep"] = std::move(sweep);
  j["warnings"] = r.warnings;
}

void from_json(const json& j, MetricReport& r) {
  r = MetricReport{};
  r.model_id = require(j, "model_id").get<std::string>();
  r.threshold = require(j, "threshold").get<std::int64_t>();
  r.i_avg_ece = opt_get<double>(j, "i_avg_ece");
  r.c_avg_ece = opt_get<double>(j, "c_avg_ece");
  r.num_ece = opt_get<double>(j, "num_ece");
  r.c_avg_cv = opt_get<double>(j, "c_avg_cv");
  r.mac = opt_get<double>(j, "mac");
  r.mrc = opt_get<double>(j, "mrc");
  r.i_avg_cv = opt_get<double>(j, "i_avg_cv");
  for (const auto& p : require(j, "per_dataset_ece"))
    r.per_dataset_ece.push_back({p.at("train").get<std::string>(), p.at("test").get<std::string>(),
                                 p.at("ece").get<double>(), p.at("coverage").get<double>()});
  r.shared_markers = require(j, "shared_markers").get<std::vector<std::string>>();
  for (const auto& s : require(j, "skipped"))
    r.skipped.push_back({s.at("scope").get<std::string>(), s.at("reason").get<std::string>()});
  r.coverage = require(j, "coverage").get<double>();
  r.accuracies = require(j, "accuracies").get<std::map<std::string, double>>();
  r.mean_accuracy = require(j, "mean_accuracy").get<double>();
  r.marker_diversity = require(j, "marker_diversity").get<std::map<std::string, std::int64_t>>();
  for (const auto& o : require(j, "sweep")) {
    ThresholdRow row;
    row.threshold = o.at("threshold").get<std::int64_t>();
    row.c_avg_cv = opt_get<double>(o, "c_avg_cv");
    row.mac = opt_get<double>(o, "mac");
    row.mrc = opt_get<double>(o, "mrc");
    row.i_avg_cv = opt_get<double>(o, "i_avg_cv");
    row.shared_markers = o.at("shared_markers").get<std::int64_t>();
    row.markers_per_dataset = o.at("markers_per_dataset").get<std::map<std::string, std::int64_t>>();
    r.sweep.push_back(std::move(row));
  }
  r.warnings = require(j, "warnings").get<std::vector<std::string>>();
}

// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

template <class T>
JsonlResult<T> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  JsonlResult<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.values.push_back(json::parse(line).get<T>());
    } catch (const std::exception& e) {
      out.errors.push_back({lineno, e.what()});
    }
  }
  return out;
}

template <class T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> values) {
  std::string buf;
  for (const auto& v : values) {
    buf += json(v).dump();
    buf += '\n';
  }
  write_file_atomic(path, buf);
}

template JsonlResult<QAItem> read_jsonl<QAItem>(const std::filesystem::path&);
template JsonlResult<ResponseRecord> read_jsonl<ResponseRecord>(const std::filesystem::path&);
template void write_jsonl<QAItem>(const std::filesystem::path&, std::span<const QAItem>);
template void write_jsonl<ResponseRecord>(const std::filesystem::path&, std::span<const ResponseRecord>);

JsonlResult<QAItem> read_items(const std::filesystem::path& path) { return read_jsonl<QAItem>(path); }
JsonlResult<ResponseRecord> read_records(const std::filesystem::path& path) {
  return read_jsonl<ResponseRecord>(path);
}
void write_items(const std::filesystem::path& path, std::span<const QAItem> items) {
  write_jsonl<QAItem>(path, items);
}
void write_records(const std::filesystem::path& path, std::span<const ResponseRecord> records) {
  write_jsonl<ResponseRecord>(path, records);
}

std::filesystem::path write_error_sidecar(const std::filesystem::path& input,
                                          std::span<const LineError> errors) {
  std::filesystem::path sidecar = input;
  sidecar += ".errors.jsonl";
  if (errors.empty()) return sidecar;
  std::string buf;
  for (const auto& e : errors) {
    buf += json{{"line", e.line}, {"error", e.message}}.dump();
    buf += '\n';
  }
  write_file_atomic(sidecar, buf);
  return sidecar;
}

}  // namespace epimark
