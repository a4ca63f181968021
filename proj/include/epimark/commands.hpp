#pragma once

// The pipeline steps behind the CLI subcommands. Each step reads and writes
// files under a run directory:
//
//   items/<dataset>/{train,test}.jsonl
//   raw/<model>/<dataset>.<split>.<mode>.jsonl
//   records/<model>/<dataset>.<split>.<mode>.jsonl
//   tables/<model>.json
//   reports/
//   manifest.json   seeds and arguments of every step that ran

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "epimark/elicit.hpp"
#include "epimark/evaluate.hpp"
#include "epimark/extract.hpp"
#include "epimark/ingest.hpp"
#include "epimark/synth.hpp"

namespace epimark::commands {

namespace fs = std::filesystem;

struct RunContext {
  fs::path run_dir = ".";
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();  // contents of --config
};

/// Records `args` under steps.<step> in manifest.json, together with the seed.
void update_manifest(const RunContext& ctx, const std::string& step, const nlohmann::json& args);

struct PrepareArgs {
  std::string dataset_id;
  fs::path in;
  std::optional<fs::path> out;  // default items/<dataset>
  std::optional<ingest::SampleSizes> sample_sizes;
};

struct PrepareResult {
  fs::path out_dir;
  std::size_t train = 0;
  std::size_t test = 0;
};

PrepareResult prepare(const RunContext& ctx, const PrepareArgs& args);

struct GenerateArgs {
  fs::path items;
  PromptMode mode = PromptMode::marker;
  std::string model_id;
  std::optional<fs::path> out;  // default raw/<model>/<items stem>.<mode>.jsonl
};

struct GenerateResult {
  fs::path out;
  std::size_t records = 0;
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
};

/// Client settings from ctx.config with the run's cache directory as default.
elicit::ClientConfig client_config(const RunContext& ctx);

GenerateResult generate(const RunContext& ctx, const GenerateArgs& args, elicit::Client& client);

struct ExtractArgs {
  fs::path raw;
  std::vector<fs::path> items;  // every file whose items the raw records may reference
  extract::StrategyKind strategy = extract::StrategyKind::rule_based;
  std::optional<fs::path> lexicon;
  std::optional<fs::path> out;  // default records/<model>/<raw file name>
};

struct ExtractResult {
  fs::path out;
  extract::Diagnostics diagnostics;
  std::size_t skipped_lines = 0;
};

/// `client` is needed only for the llm_assisted and hybrid strategies.
ExtractResult extract_records(const RunContext& ctx, const ExtractArgs& args, elicit::Client* client = nullptr);

struct MetricsArgs {
  std::optional<fs::path> records_dir;  // default records/
  std::optional<fs::path> report;       // default reports/report.json
  std::optional<fs::path> tables_dir;   // default tables/
  EvaluateOptions options;
};

struct MetricsResult {
  fs::path report;
  std::vector<ModelEvaluation> evaluations;
  std::size_t skipped_lines = 0;
};

/// Reads every *.jsonl under the records directory.
std::vector<ResponseRecord> load_records_dir(const fs::path& dir, std::size_t* skipped_lines = nullptr);

MetricsResult compute_metrics(const RunContext& ctx, const MetricsArgs& args);

struct ReportArgs {
  std::optional<fs::path> report;      // default reports/report.json
  std::optional<fs::path> tables_dir;  // default tables/
  std::optional<fs::path> out_dir;     // default reports/
  std::size_t heatmap_markers = 10;
};

std::vector<fs::path> emit(const RunContext& ctx, const ReportArgs& args);

struct SynthArgs {
  std::optional<fs::path> profile;  // JSON profile; default reference profile
  std::vector<std::string> datasets;
  std::optional<std::int64_t> n_records;
  std::vector<double> shifts;
  bool numeric = false;
  std::optional<fs::path> out;  // default records/
};

struct SynthResult {
  fs::path out;
  std::size_t records = 0;
};

synth::SyntheticProfile profile_from_json(const nlohmann::json& j);
SynthResult synthesize(const RunContext& ctx, const SynthArgs& args);

}  // namespace epimark::commands
