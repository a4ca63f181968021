#include "epimark/commands.hpp"

#include <algorithm>
#include <map>

#include <spdlog/spdlog.h>

#include "epimark/json_io.hpp"
#include "epimark/report.hpp"

namespace epimark::commands {

namespace {

fs::path or_default(const std::optional<fs::path>& p, const fs::path& fallback) { return p ? *p : fallback; }

// Paths inside the run directory are recorded relative to it so manifests of
// equivalent runs compare equal.
std::string display(const RunContext& ctx, const fs::path& p) {
  const fs::path rel = p.lexically_normal().lexically_relative(ctx.run_dir.lexically_normal());
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

template <class T>
std::vector<T> checked(const fs::path& path, JsonlResult<T> result) {
  if (!result.errors.empty()) {
    const auto sidecar = write_error_sidecar(path, result.errors);
    spdlog::warn("{}: skipped {} malformed line(s), see {}", path.string(), result.errors.size(), sidecar.string());
  }
  return std::move(result.values);
}

std::vector<fs::path> jsonl_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.ends_with(".jsonl") && !name.ends_with(".errors.jsonl")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void update_manifest(const RunContext& ctx, const std::string& step, const json& args) {
  const fs::path path = ctx.run_dir / "manifest.json";
  json j = json::object();
  if (fs::exists(path)) {
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw DataError("corrupt manifest " + path.string() + ": " + e.what());
    }
  }
  j["seed"] = ctx.seed;
  if (!ctx.config.empty()) j["config"] = ctx.config;
  j["steps"][step] = args;
  write_file_atomic(path, j.dump(2) + "\n");
}

PrepareResult prepare(const RunContext& ctx, const PrepareArgs& args) {
  if (!ingest::is_known_dataset(args.dataset_id)) throw UsageError("unknown dataset '" + args.dataset_id + "'");
  ingest::DatasetSpec spec{args.dataset_id, args.in, ctx.seed, args.sample_sizes};
  const auto prepared = ingest::prepare_dataset(spec);
  const fs::path out = or_default(args.out, ctx.run_dir / "items" / args.dataset_id);
  write_items(out / "train.jsonl", prepared.train);
  write_items(out / "test.jsonl", prepared.test);

  json m{{"dataset", args.dataset_id}, {"in", display(ctx, args.in)}, {"out", display(ctx, out)},
         {"train", prepared.train.size()}, {"test", prepared.test.size()}};
  if (args.sample_sizes) m["sample_sizes"] = {args.sample_sizes->train_n, args.sample_sizes->test_n};
  update_manifest(ctx, "prepare/" + args.dataset_id, m);
  return {out, prepared.train.size(), prepared.test.size()};
}

elicit::ClientConfig client_config(const RunContext& ctx) {
  elicit::ClientConfig base;
  base.cache_dir = ctx.run_dir / "cache";
  const json* section = &ctx.config;
  if (auto it = ctx.config.find("client"); it != ctx.config.end()) section = &*it;
  return elicit::client_config_from_json(*section, base);
}

GenerateResult generate(const RunContext& ctx, const GenerateArgs& args, elicit::Client& client) {
  if (!args.model_id.empty() && args.model_id != client.config().model_id)
    throw UsageError("generate model '" + args.model_id + "' differs from the client's model");
  const auto items = checked(args.items, read_items(args.items));
  if (items.empty()) throw DataError("no items in " + args.items.string());

  const std::size_t calls_before = client.network_calls();
  const std::size_t hits_before = client.cache_hits();
  const auto records = elicit::generate_responses(items, args.mode, client);

  const std::string name = args.items.parent_path().filename().string() + "." + args.items.stem().string() + "." +
                           std::string(to_string(args.mode)) + ".jsonl";
  const fs::path out =
      or_default(args.out, ctx.run_dir / "raw" / report::file_stem(client.config().model_id) / name);
  write_records(out, records);

  GenerateResult res{out, records.size(), client.network_calls() - calls_before, client.cache_hits() - hits_before};
  const auto& cfg = client.config();
  update_manifest(ctx, "generate/" + display(ctx, out),
                  {{"items", display(ctx, args.items)},
                   {"mode", to_string(args.mode)},
                   {"model", cfg.model_id},
                   {"endpoint_url", cfg.endpoint_url},
                   {"temperature", cfg.temperature},
                   {"max_tokens", cfg.max_tokens},
                   {"records", records.size()}});
  return res;
}

ExtractResult extract_records(const RunContext& ctx, const ExtractArgs& args, elicit::Client* client) {
  std::vector<fs::path> item_files = args.items;
  if (item_files.empty()) item_files = jsonl_files(ctx.run_dir / "items");
  std::map<ItemRef, QAItem> items;
  for (const auto& f : item_files)
    for (auto& item : checked(f, read_items(f))) {
      ItemRef ref{item.dataset_id, item.split, item.item_id};
      items.emplace(std::move(ref), std::move(item));
    }

  std::optional<extract::Lexicon> lexicon;
  if (args.lexicon) lexicon = extract::Lexicon::load(*args.lexicon);
  if (args.strategy != extract::StrategyKind::rule_based && client == nullptr)
    throw UsageError("the " + std::string(extract::to_string(args.strategy)) + " strategy needs an endpoint");
  extract::ExtractionStrategy strategy;
  strategy.kind = args.strategy;
  strategy.lexicon = lexicon ? &*lexicon : nullptr;
  strategy.client = client;

  auto raw = read_records(args.raw);
  ExtractResult res;
  std::vector<ResponseRecord> out;
  std::vector<LineError> missing;
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    const auto& r = raw.values[i];
    auto it = items.find(r.item);
    if (it == items.end()) {
      missing.push_back({i + 1, "unknown item " + r.item.dataset_id + "/" + std::string(to_string(r.item.split)) +
                                    "/" + r.item.item_id});
      continue;
    }
    auto rec = extract::extract_record(r, it->second, strategy, &res.diagnostics);
    if (auto v = validate_record(rec, it->second); !v.empty())
      throw DataError("extracted record " + r.item.item_id + " violates: " + v.front());
    out.push_back(std::move(rec));
  }
  // Line numbers of unknown items index the decoded records, not file lines.
  auto errors = raw.errors;
  errors.insert(errors.end(), missing.begin(), missing.end());
  if (!errors.empty()) {
    const auto sidecar = write_error_sidecar(args.raw, errors);
    spdlog::warn("{}: skipped {} record(s), see {}", args.raw.string(), errors.size(), sidecar.string());
  }
  res.skipped_lines = errors.size();

  const fs::path model_dir = out.empty() ? fs::path{} : fs::path(report::file_stem(out.front().model_id));
  res.out = or_default(args.out, ctx.run_dir / "records" / model_dir / args.raw.filename());
  write_records(res.out, out);

  const auto& d = res.diagnostics;
  spdlog::info("extracted {} records: {} invalid answers, {} without marker, {} with several hedges, {} invalid "
               "numeric, {} extractor fallbacks",
               d.records, d.invalid_answers, d.no_marker, d.multiple_hedges, d.invalid_numeric, d.llm_fallbacks);
  update_manifest(ctx, "extract/" + display(ctx, res.out),
                  {{"raw", display(ctx, args.raw)},
                   {"strategy", extract::to_string(args.strategy)},
                   {"lexicon", args.lexicon ? display(ctx, *args.lexicon) : std::string("builtin")},
                   {"records", d.records},
                   {"invalid_answers", d.invalid_answers},
                   {"no_marker", d.no_marker},
                   {"multiple_hedges", d.multiple_hedges},
                   {"invalid_numeric", d.invalid_numeric},
                   {"llm_fallbacks", d.llm_fallbacks},
                   {"skipped", res.skipped_lines}});
  return res;
}

std::vector<ResponseRecord> load_records_dir(const fs::path& dir, std::size_t* skipped_lines) {
  std::vector<ResponseRecord> out;
  std::size_t skipped = 0;
  for (const auto& f : jsonl_files(dir)) {
    auto result = read_records(f);
    skipped += result.errors.size();
    for (auto& r : checked(f, std::move(result))) out.push_back(std::move(r));
  }
  if (skipped_lines) *skipped_lines = skipped;
  return out;
}

MetricsResult compute_metrics(const RunContext& ctx, const MetricsArgs& args) {
  const fs::path records_dir = or_default(args.records_dir, ctx.run_dir / "records");
  MetricsResult res;
  const auto records = load_records_dir(records_dir, &res.skipped_lines);
  if (records.empty()) throw DataError("no records under " + records_dir.string());
  res.evaluations = evaluate_all(records, args.options);

  std::vector<MetricReport> reports;
  for (const auto& ev : res.evaluations) reports.push_back(ev.report);
  res.report = or_default(args.report, ctx.run_dir / "reports" / "report.json");
  write_file_atomic(res.report, report::reports_to_json(reports).dump(2) + "\n");

  const fs::path tables_dir = or_default(args.tables_dir, ctx.run_dir / "tables");
  for (const auto& ev : res.evaluations) {
    json arr = json::array();
    for (const auto& [id, t] : ev.train_tables) arr.push_back(t);
    write_file_atomic(tables_dir / (report::file_stem(ev.report.model_id) + ".json"), arr.dump(2) + "\n");
  }

  const auto& o = args.options;
  update_manifest(ctx, "metrics",
                  {{"records_dir", display(ctx, records_dir)},
                   {"report", display(ctx, res.report)},
                   {"threshold", o.threshold},
                   {"thresholds", o.thresholds},
                   {"include_none_marker", o.include_none_marker},
                   {"ece_bins", o.bins.to_string()},
                   {"coverage_floor", o.coverage_floor},
                   {"interval_level", o.interval_level},
                   {"records", records.size()},
                   {"skipped_lines", res.skipped_lines}});
  return res;
}

std::vector<fs::path> emit(const RunContext& ctx, const ReportArgs& args) {
  const fs::path report_path = or_default(args.report, ctx.run_dir / "reports" / "report.json");
  json j;
  try {
    j = json::parse(read_file(report_path));
  } catch (const json::exception& e) {
    throw DataError("malformed report " + report_path.string() + ": " + e.what());
  }
  report::ReportInputs in;
  in.reports = report::reports_from_json(j);

  const fs::path tables_dir = or_default(args.tables_dir, ctx.run_dir / "tables");
  for (const auto& r : in.reports) {
    const fs::path p = tables_dir / (report::file_stem(r.model_id) + ".json");
    if (!fs::exists(p)) continue;
    try {
      for (auto& t : json::parse(read_file(p)).get<std::vector<ConfidenceTable>>())
        in.train_tables[r.model_id][t.dataset_id] = std::move(t);
    } catch (const json::exception& e) {
      throw DataError("malformed tables " + p.string() + ": " + e.what());
    }
  }

  report::ReportOptions opt;
  opt.out_dir = or_default(args.out_dir, ctx.run_dir / "reports");
  opt.heatmap_markers = args.heatmap_markers;
  opt.seed = ctx.seed;
  auto written = report::emit_report(in, opt);
  update_manifest(ctx, "report",
                  {{"report", display(ctx, report_path)},
                   {"out_dir", display(ctx, opt.out_dir)},
                   {"heatmap_markers", args.heatmap_markers},
                   {"files", written.size()}});
  return written;
}

synth::SyntheticProfile profile_from_json(const json& j) {
  synth::SyntheticProfile p;
  try {
    for (const auto& m : j.at("markers"))
      p.markers.push_back({m.at("text").get<std::string>(), m.at("accuracy").get<double>(), m.at("weight").get<double>()});
    p.datasets = j.at("datasets").get<std::vector<std::string>>();
    p.shifts = j.value("shifts", std::vector<double>{});
    p.seed = j.value("seed", std::uint64_t{0});
    p.n_records = j.value("n_records", p.n_records);
    p.model_id = j.value("model_id", p.model_id);
    p.numeric = j.value("numeric", p.numeric);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad synthetic profile: ") + e.what());
  }
  synth::validate_profile(p);
  return p;
}

SynthResult synthesize(const RunContext& ctx, const SynthArgs& args) {
  synth::SyntheticProfile p;
  if (args.profile) {
    json j;
    try {
      j = json::parse(read_file(*args.profile));
    } catch (const json::exception& e) {
      throw UsageError("profile " + args.profile->string() + " is not JSON: " + e.what());
    }
    p = profile_from_json(j);
    if (!j.contains("seed")) p.seed = ctx.seed;
  } else {
    p = synth::reference_profile(
        args.datasets.empty() ? std::vector<std::string>{"boolq", "strategyqa", "csqa", "medmcqa", "casehold"}
                              : args.datasets,
        ctx.seed);
  }
  if (args.profile && !args.datasets.empty()) p.datasets = args.datasets;
  if (args.n_records) p.n_records = *args.n_records;
  if (!args.shifts.empty()) p.shifts = args.shifts;
  if (args.numeric) p.numeric = true;
  synth::validate_profile(p);

  const auto run = synth::generate_synthetic(p);
  std::map<std::string, std::vector<ResponseRecord>> files;
  for (const auto& r : run.records)
    files[r.item.dataset_id + "." + std::string(to_string(r.item.split)) + "." +
          std::string(to_string(r.prompt_mode)) + ".jsonl"]
        .push_back(r);
  const fs::path out = or_default(args.out, ctx.run_dir / "records") / report::file_stem(p.model_id);
  for (const auto& [name, recs] : files) write_records(out / name, recs);

  json m{{"out", display(ctx, out)},          {"datasets", p.datasets}, {"shifts", p.shifts},
         {"seed", p.seed},                     {"n_records", p.n_records}, {"model", p.model_id},
         {"numeric", p.numeric},               {"markers", json::array()}};
  for (const auto& mk : p.markers)
    m["markers"].push_back({{"text", mk.text}, {"accuracy", mk.accuracy}, {"weight", mk.weight}});
  update_manifest(ctx, "synth", m);
  return {out, run.records.size()};
}

}  // namespace epimark::commands
