// Command-line front end: prepare, generate, extract, metrics, report, synth.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 endpoint error.

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "epimark/commands.hpp"
#include "epimark/json_io.hpp"

namespace fs = std::filesystem;
using namespace epimark;

namespace {

struct Options {
  std::uint64_t seed = 0;
  fs::path run_dir = ".";
  std::optional<fs::path> config;
  bool quiet = false;

  commands::PrepareArgs prepare;
  std::size_t train_n = 0;
  std::size_t test_n = 0;
  bool sizes_given = false;

  commands::GenerateArgs generate;
  std::string mode = "marker";

  commands::ExtractArgs extract;
  std::string strategy = "rule_based";
  std::string extractor_model;

  commands::MetricsArgs metrics;
  std::string ece_bins = "per_prediction";

  commands::ReportArgs report;

  commands::SynthArgs synth;
  std::int64_t synth_n = 0;
};

commands::RunContext context(const Options& o) {
  commands::RunContext ctx;
  ctx.run_dir = o.run_dir;
  ctx.seed = o.seed;
  if (o.config) {
    try {
      ctx.config = json::parse(read_file(*o.config));
    } catch (const json::exception& e) {
      throw UsageError("config " + o.config->string() + " is not JSON: " + e.what());
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
  }
  return ctx;
}

int run(CLI::App& app, Options& o) {
  const auto ctx = context(o);
  if (app.got_subcommand("prepare")) {
    if (o.sizes_given) o.prepare.sample_sizes = ingest::SampleSizes{o.train_n, o.test_n};
    const auto r = commands::prepare(ctx, o.prepare);
    std::cout << "prepared " << o.prepare.dataset_id << ": " << r.train << " train, " << r.test << " test -> "
              << r.out_dir.string() << "\n";
  } else if (app.got_subcommand("generate")) {
    o.generate.mode = parse_prompt_mode(o.mode);
    auto cfg = commands::client_config(ctx);
    if (!o.generate.model_id.empty()) cfg.model_id = o.generate.model_id;
    if (cfg.model_id.empty()) throw UsageError("--model (or model_id in the config) is required");
    auto transport = elicit::make_http_transport(cfg.timeout);
    elicit::Client client(cfg, *transport);
    const auto r = commands::generate(ctx, o.generate, client);
    std::cout << "generated " << r.records << " responses (" << r.network_calls << " network calls, "
              << r.cache_hits << " cache hits) -> " << r.out.string() << "\n";
  } else if (app.got_subcommand("extract")) {
    o.extract.strategy = extract::parse_strategy(o.strategy);
    std::unique_ptr<elicit::Transport> transport;
    std::unique_ptr<elicit::Client> client;
    if (o.extract.strategy != extract::StrategyKind::rule_based) {
      auto cfg = commands::client_config(ctx);
      if (!o.extractor_model.empty()) cfg.model_id = o.extractor_model;
      if (cfg.model_id.empty()) throw UsageError("--extractor-model (or model_id in the config) is required");
      transport = elicit::make_http_transport(cfg.timeout);
      client = std::make_unique<elicit::Client>(cfg, *transport);
    }
    const auto r = commands::extract_records(ctx, o.extract, client.get());
    std::cout << "extracted " << r.diagnostics.records << " records -> " << r.out.string() << "\n";
  } else if (app.got_subcommand("metrics")) {
    o.metrics.options.bins = stats::EceBins::parse(o.ece_bins);
    const auto r = commands::compute_metrics(ctx, o.metrics);
    for (const auto& ev : r.evaluations)
      for (const auto& w : ev.report.warnings) spdlog::warn("{}: {}", ev.report.model_id, w);
    std::cout << "evaluated " << r.evaluations.size() << " model(s) -> " << r.report.string() << "\n";
  } else if (app.got_subcommand("report")) {
    const auto files = commands::emit(ctx, o.report);
    for (const auto& f : files) std::cout << f.string() << "\n";
  } else if (app.got_subcommand("synth")) {
    if (o.synth_n > 0) o.synth.n_records = o.synth_n;
    const auto r = commands::synthesize(ctx, o.synth);
    std::cout << "synthesized " << r.records << " records -> " << r.out.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure how reliably a model's epistemic markers convey confidence."};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--run-dir", o.run_dir, "Run directory")->capture_default_str();
  app.add_option("--config", o.config, "JSON config file (endpoint and client settings)");
  app.add_flag("-q,--quiet", o.quiet, "Only log warnings and errors");

  auto* prep = app.add_subcommand("prepare", "Convert a raw benchmark into train/test items");
  prep->add_option("--dataset", o.prepare.dataset_id, "Dataset id")->required();
  prep->add_option("--in", o.prepare.in, "Raw dataset file or directory")->required();
  prep->add_option("--out", o.prepare.out, "Output directory (default <run-dir>/items/<dataset>)");
  auto* tn = prep->add_option("--train-n", o.train_n, "Training sample size (0 keeps all)");
  auto* sn = prep->add_option("--test-n", o.test_n, "Test sample size (0 keeps all)");
  tn->needs(sn);
  sn->needs(tn);
  prep->callback([&] { o.sizes_given = tn->count() > 0; });

  auto* gen = app.add_subcommand("generate", "Elicit one response per item");
  gen->add_option("--items", o.generate.items, "Items JSONL")->required();
  gen->add_option("--mode", o.mode, "marker or numeric")->check(CLI::IsMember({"marker", "numeric"}));
  gen->add_option("--model", o.generate.model_id, "Model id sent to the endpoint");
  gen->add_option("--out", o.generate.out, "Raw records JSONL");

  auto* ext = app.add_subcommand("extract", "Extract answers, markers and numeric confidences");
  ext->add_option("--raw", o.extract.raw, "Raw records JSONL")->required();
  ext->add_option("--items", o.extract.items, "Items JSONL (repeatable; default all under <run-dir>/items)");
  ext->add_option("--strategy", o.strategy, "rule_based, llm_assisted or hybrid")
      ->check(CLI::IsMember({"rule_based", "llm_assisted", "hybrid"}));
  ext->add_option("--lexicon", o.extract.lexicon, "Hedge lexicon file (default builtin)");
  ext->add_option("--extractor-model", o.extractor_model, "Model used by the llm strategies");
  ext->add_option("--out", o.extract.out, "Extracted records JSONL");

  auto* met = app.add_subcommand("metrics", "Compute the metric report");
  met->add_option("--records-dir", o.metrics.records_dir, "Directory of extracted records");
  met->add_option("--threshold", o.metrics.options.threshold, "Minimum training count per marker")
      ->capture_default_str();
  met->add_option("--thresholds", o.metrics.options.thresholds, "Threshold sweep, e.g. 10,50,100")->delimiter(',');
  met->add_flag("--include-none-marker", o.metrics.options.include_none_marker,
                "Keep NO_MARKER in the marker-analysis metrics");
  met->add_option("--ece-bins", o.ece_bins, "per_prediction or fixed:B")->capture_default_str();
  met->add_option("--coverage-floor", o.metrics.options.coverage_floor, "Warn when transfer coverage falls below")
      ->capture_default_str();
  met->add_option("--report", o.metrics.report, "Report JSON path");
  met->add_option("--tables-dir", o.metrics.tables_dir, "Where to write confidence tables");

  auto* rep = app.add_subcommand("report", "Render CSV tables and figure data from a report");
  rep->add_option("--report", o.report.report, "Report JSON path");
  rep->add_option("--tables-dir", o.report.tables_dir, "Confidence tables directory");
  rep->add_option("--out", o.report.out_dir, "Output directory");
  rep->add_option("--heatmap-markers", o.report.heatmap_markers, "Markers per heatmap")->capture_default_str();

  auto* syn = app.add_subcommand("synth", "Generate synthetic records from a planted profile");
  syn->add_option("--profile", o.synth.profile, "Profile JSON");
  syn->add_option("--datasets", o.synth.datasets, "Dataset ids")->delimiter(',');
  syn->add_option("--n", o.synth_n, "Records per dataset and split");
  syn->add_option("--shifts", o.synth.shifts, "Accuracy shift per dataset")->delimiter(',');
  syn->add_flag("--numeric", o.synth.numeric, "Also emit numeric-mode records");
  syn->add_option("--out", o.synth.out, "Records directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("epimark"));
  spdlog::set_level(o.quiet ? spdlog::level::warn : spdlog::level::info);
  try {
    return run(app, o);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
