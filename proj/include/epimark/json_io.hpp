#pragma once

// JSON encodings of the data model and JSON-Lines streaming.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "epimark/core.hpp"

namespace epimark {

using json = nlohmann::json;

void to_json(json& j, const QAItem& item);
void from_json(const json& j, QAItem& item);
void to_json(json& j, const ResponseRecord& r);
void from_json(const json& j, ResponseRecord& r);
void to_json(json& j, const ConfidenceTable& t);
void from_json(const json& j, ConfidenceTable& t);
void to_json(json& j, const MetricReport& r);
void from_json(const json& j, MetricReport& r);

/// A line that failed to decode. Lines are 1-based.
struct LineError {
  std::size_t line = 0;
  std::string message;
};

template <class T>
struct JsonlResult {
  std::vector<T> values;
  std::vector<LineError> errors;
};

/// Reads one JSON document per line. Blank lines are ignored; a line that
/// does not decode is recorded in `errors` and reading continues. Throws
/// DataError only when the file cannot be opened.
template <class T>
JsonlResult<T> read_jsonl(const std::filesystem::path& path);

/// Writes one compact JSON document per line, '\n' terminated. Writes to a
/// temporary sibling and renames it over `path`.
template <class T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> values);

JsonlResult<QAItem> read_items(const std::filesystem::path& path);
JsonlResult<ResponseRecord> read_records(const std::filesystem::path& path);
void write_items(const std::filesystem::path& path, std::span<const QAItem> items);
void write_records(const std::filesystem::path& path, std::span<const ResponseRecord> records);

/// Writes the line errors as JSON-Lines next to the input ("<path>.errors.jsonl").
/// Does nothing when there are no errors. Returns the sidecar path.
std::filesystem::path write_error_sidecar(const std::filesystem::path& input,
                                          std::span<const LineError> errors);

/// Atomic whole-file write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace epimark
