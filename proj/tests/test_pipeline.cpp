#include <gtest/gtest.h>

#include <random>

#include "epimark/commands.hpp"
#include "epimark/evaluate.hpp"
#include "epimark/figures.hpp"
#include "epimark/json_io.hpp"
#include "epimark/report.hpp"
#include "epimark/synth.hpp"
#include "helpers.hpp"

namespace epimark {
namespace {

using testing::add_marker;
using testing::slurp;
using testing::TempDir;

/// Three datasets sharing "likely" and "sure"; "maybe" appears in two.
std::vector<ResponseRecord> small_run(const std::string& model = "m") {
  std::vector<ResponseRecord> out;
  const std::vector<std::tuple<std::string, int, int, int>> spec{
      {"boolq", 8, 16, 6}, {"csqa", 12, 18, 9}, {"mmlu", 10, 14, 7}};
  for (const auto& [ds, likely, sure, maybe] : spec) {
    for (Split split : {Split::train, Split::test}) {
      add_marker(out, ds, split, "likely", 20, likely, model);
      add_marker(out, ds, split, "sure", 20, sure, model);
      if (ds != "mmlu") add_marker(out, ds, split, "maybe", 20, maybe, model);
      add_marker(out, ds, split, "", 12, 6, model);
    }
    for (int i = 0; i < 10; ++i)
      out.push_back(testing::numeric_record(ds, Split::test, "n" + std::to_string(i), 0.1 * i, i % 2 == 0, model));
  }
  return out;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

TEST(Evaluate, OrderInsensitive) {
  auto records = small_run();
  const auto a = evaluate_model(records);
  std::mt19937_64 rng(4);
  std::shuffle(records.begin(), records.end(), rng);
  const auto b = evaluate_model(records);
  EXPECT_EQ(json(a.report).dump(), json(b.report).dump());
}

TEST(Evaluate, FillsEveryMetric) {
  const auto ev = evaluate_model(small_run());
  const auto& r = ev.report;
  EXPECT_TRUE(r.i_avg_ece && r.c_avg_ece && r.num_ece && r.c_avg_cv && r.mac && r.mrc && r.i_avg_cv);
  EXPECT_EQ(r.per_dataset_ece.size(), 9u);
  EXPECT_EQ(r.shared_markers, (std::vector<std::string>{"likely", "sure"}));
  EXPECT_EQ(ev.ece.cross_pairs, 6);
  EXPECT_EQ(ev.mrc.enumerated, 3);
  // mmlu lacks "maybe", so its table covers 52 of the 72 boolq and csqa test records
  EXPECT_NEAR(r.coverage, (7.0 + 2.0 * 52.0 / 72.0) / 9.0, 1e-12);
  // NO_MARKER stays in the transfer tables but not in the analysis tables
  EXPECT_TRUE(ev.train_tables.at("boolq").confidence_of(Marker::none()));
  EXPECT_FALSE(ev.analysis_tables.at("boolq").confidence_of(Marker::none()));
  EXPECT_EQ(r.marker_diversity.at("boolq"), 3);
  EXPECT_EQ(r.marker_diversity.at("mmlu"), 2);
}

TEST(Evaluate, AccuracyIsTrainSplitMarkerMode) {
  const auto ev = evaluate_model(small_run());
  EXPECT_NEAR(ev.report.accuracies.at("boolq"), (8 + 16 + 6 + 6) / 72.0, 1e-12);
  EXPECT_NEAR(ev.report.accuracies.at("mmlu"), (10 + 14 + 6) / 52.0, 1e-12);
}

TEST(Evaluate, InvalidAnswersExcludedWithWarning) {
  auto records = small_run();
  auto bad = records.front();
  bad.item.item_id = "bad";
  bad.extracted_answer = std::string(kInvalid);
  bad.correct.reset();
  records.push_back(bad);
  const auto ev = evaluate_model(records);
  ASSERT_FALSE(ev.report.warnings.empty());
  EXPECT_NE(ev.report.warnings.front().find("without a valid answer"), std::string::npos);
  EXPECT_EQ(json(ev.report.accuracies).dump(), json(evaluate_model(small_run()).report.accuracies).dump());
}

TEST(Evaluate, RejectsUnextractedAndMixedModels) {
  auto records = small_run();
  records.front().extracted_answer.reset();
  EXPECT_THROW(evaluate_model(records), DataError);
  auto mixed = small_run();
  mixed.front().model_id = "other";
  EXPECT_THROW(evaluate_model(mixed), DataError);
  EXPECT_THROW(evaluate_model(std::vector<ResponseRecord>{}), DataError);
}

TEST(Evaluate, SweepRowsPerThreshold) {
  EvaluateOptions opt;
  opt.thresholds = {10, 20, 21};
  const auto ev = evaluate_model(small_run(), opt);
  ASSERT_EQ(ev.report.sweep.size(), 3u);
  EXPECT_EQ(ev.report.sweep[0].threshold, 10);
  EXPECT_EQ(ev.report.sweep[1].shared_markers, 2);
  EXPECT_EQ(ev.report.sweep[2].shared_markers, 0);
  EXPECT_FALSE(ev.report.sweep[2].mrc);
}

TEST(Evaluate, AllGroupsByModel) {
  auto records = small_run("b");
  for (auto& r : small_run("a")) records.push_back(r);
  const auto evs = evaluate_all(records);
  ASSERT_EQ(evs.size(), 2u);
  EXPECT_EQ(evs[0].report.model_id, "a");
  EXPECT_EQ(evs[0].report.per_dataset_ece, evs[1].report.per_dataset_ece);
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

TEST(Synth, SameSeedSameRecords) {
  auto p = synth::reference_profile({"a", "b"}, 3);
  p.n_records = 200;
  p.numeric = true;
  const auto x = synth::generate_synthetic(p);
  const auto y = synth::generate_synthetic(p);
  EXPECT_EQ(x.records, y.records);
  EXPECT_EQ(x.records.size(), 2u * 2u * 200u * 2u);
  p.seed = 4;
  EXPECT_NE(synth::generate_synthetic(p).records, x.records);
  for (std::size_t i = 0; i < x.records.size(); ++i) {
    const auto& r = x.records[i];
    const auto* item = &x.items[0];
    for (const auto& it : x.items)
      if (it.dataset_id == r.item.dataset_id && it.split == r.item.split && it.item_id == r.item.item_id) item = &it;
    ASSERT_TRUE(validate_record(r, *item).empty()) << i;
  }
}

TEST(Synth, SingleMarkerProfile) {
  synth::SyntheticProfile p;
  p.markers = {{"only", 0.7, 1.0}};
  p.datasets = {"d"};
  p.n_records = 1000;
  const auto run = synth::generate_synthetic(p);
  int correct = 0, train = 0;
  for (const auto& r : run.records) {
    EXPECT_EQ(r.marker->text(), "only");
    if (r.item.split == Split::train) {
      ++train;
      correct += *r.correct;
    }
  }
  EXPECT_EQ(train, 1000);
  EXPECT_NEAR(correct / 1000.0, 0.7, 0.05);
}

TEST(Synth, ProfileValidation) {
  synth::SyntheticProfile p;
  p.markers = {{"a", 0.5, 0.6}};
  p.datasets = {"d"};
  EXPECT_THROW(synth::validate_profile(p), UsageError);
  p.markers = {{"a", 1.5, 1.0}};
  EXPECT_THROW(synth::validate_profile(p), UsageError);
  p.markers = {{"a", 0.5, 1.0}};
  p.shifts = {0.1, 0.2};
  EXPECT_THROW(synth::validate_profile(p), UsageError);
  p.shifts = {};
  p.n_records = 0;
  EXPECT_THROW(synth::validate_profile(p), UsageError);
  EXPECT_NO_THROW(synth::validate_profile(synth::reference_profile({"x"}, 1)));
}

// ---------------------------------------------------------------------------
// figures
// ---------------------------------------------------------------------------

metrics::Tables two_tables() {
  metrics::Tables t;
  auto add = [&](const std::string& ds, const std::string& m, std::int64_t n, std::int64_t k) {
    auto& table = t[ds];
    table.dataset_id = ds;
    table.model_id = "m";
    const double c = static_cast<double>(k) / static_cast<double>(n);
    table.entries[Marker::from_text(m)] = {n, k, c, stats::binomial_interval(k, n)};
  };
  add("a", "likely", 10, 8);
  add("a", "maybe", 10, 5);
  add("a", "sure", 10, 5);
  add("b", "likely", 10, 7);
  add("b", "sure", 10, 9);
  return t;
}

TEST(Figures, HeatmapMissingCells) {
  const auto t = two_tables();
  const std::vector<Marker> ms{Marker::from_text("likely"), Marker::from_text("maybe")};
  const auto h = figures::heatmap_matrix(t, ms);
  EXPECT_EQ(h.datasets, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(h.markers, (std::vector<std::string>{"likely", "maybe"}));
  EXPECT_DOUBLE_EQ(*h.cells[0][1], 0.7);
  EXPECT_FALSE(h.cells[1][1]);
  const auto csv = report::heatmap_csv(h);
  EXPECT_NE(csv.find("\nmaybe,0.5000,NA\n"), std::string::npos);
}

TEST(Figures, RankingTiesShareAverageRank) {
  const auto r = figures::ranking_table(two_tables());
  const auto& a = r.at("a");
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].marker.text(), "likely");
  EXPECT_DOUBLE_EQ(a[0].rank, 1.0);
  EXPECT_DOUBLE_EQ(a[1].rank, 2.5);
  EXPECT_DOUBLE_EQ(a[2].rank, 2.5);
  EXPECT_EQ(a[1].marker.text(), "maybe");
}

TEST(Figures, SelectMarkersSeededSubset) {
  const auto t = two_tables();
  const auto all = figures::select_markers(t, 10, 1);
  EXPECT_EQ(all.size(), 2u);
  const auto one = figures::select_markers(t, 1, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one, figures::select_markers(t, 1, 1));
}

TEST(Figures, DiversityNormalizes) {
  std::vector<ResponseRecord> rs;
  add_marker(rs, "d", Split::train, "Likely", 2, 1);
  add_marker(rs, "d", Split::test, "likely.", 2, 1);
  add_marker(rs, "d", Split::train, "very likely", 1, 1);
  add_marker(rs, "d", Split::train, "", 3, 1);
  rs.push_back(testing::numeric_record("d", Split::train, "n", 0.5, true));
  const auto d = figures::marker_diversity(rs);
  EXPECT_EQ(d.at({"m", "d"}), 2);
  EXPECT_EQ(figures::marker_diversity(rs, true).at({"m", "d"}), 3);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

TEST(Report, PercentFormatting) {
  EXPECT_EQ(report::percent(0.12345), "12.35");
  EXPECT_EQ(report::percent(std::nullopt), "NA");
  EXPECT_EQ(report::percent(-0.00001), "0.00");
  EXPECT_EQ(report::percent(-0.5), "-50.00");
}

TEST(Report, Table1Csv) {
  const auto ev = evaluate_model(small_run());
  std::vector<MetricReport> reports{ev.report};
  const auto csv = report::table1_csv(reports);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), report::kTable1Header);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.find("NA"), std::string::npos);
}

TEST(Report, JsonRoundTrip) {
  std::vector<MetricReport> reports{evaluate_model(small_run("a")).report, evaluate_model(small_run("b")).report};
  const auto j = report::reports_to_json(reports);
  EXPECT_EQ(report::reports_from_json(j), reports);
  EXPECT_THROW(report::reports_from_json(json{{"reports", 3}}), DataError);
}

TEST(Report, EmitIsByteIdentical) {
  TempDir one, two;
  report::ReportInputs in;
  for (const auto& m : {"a", "b/c"}) {
    auto ev = evaluate_model(small_run(m));
    in.reports.push_back(ev.report);
    in.train_tables[m] = ev.train_tables;
  }
  const auto p1 = report::emit_report(in, {one.path()});
  const auto p2 = report::emit_report(in, {two.path()});
  ASSERT_EQ(p1.size(), p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    EXPECT_EQ(p1[i].filename(), p2[i].filename());
    EXPECT_EQ(slurp(p1[i]), slurp(p2[i])) << p1[i];
  }
  EXPECT_TRUE(std::filesystem::exists(one / "table1.csv"));
  EXPECT_TRUE(std::filesystem::exists(one / "heatmap_b_c.csv"));
  EXPECT_FALSE(std::filesystem::exists(one / "capability.json"));
}

TEST(Report, FileStem) {
  EXPECT_EQ(report::file_stem("gpt-4o/mini:1"), "gpt-4o_mini_1");
  EXPECT_EQ(report::file_stem("llama.3"), "llama.3");
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

TEST(Commands, SynthMetricsReportRoundTrip) {
  TempDir dir;
  commands::RunContext ctx{dir.path(), 5, json::object()};
  commands::SynthArgs sa;
  sa.datasets = {"boolq", "csqa", "mmlu"};
  sa.n_records = 300;
  sa.numeric = true;
  const auto s = commands::synthesize(ctx, sa);
  EXPECT_EQ(s.records, 3u * 2u * 300u * 2u);

  const auto m = commands::compute_metrics(ctx, {});
  EXPECT_TRUE(std::filesystem::exists(m.report));
  ASSERT_EQ(m.evaluations.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(dir / "tables" / "synthetic.json"));

  const auto files = commands::emit(ctx, {});
  EXPECT_FALSE(files.empty());
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_TRUE(manifest["steps"].contains("synth"));
  EXPECT_TRUE(manifest["steps"].contains("metrics"));
  EXPECT_TRUE(manifest["steps"].contains("report"));
}

TEST(Commands, LoadRecordsSkipsSidecarsAndMalformedLines) {
  TempDir dir;
  const json good = testing::marker_record("d", Split::train, "1", "likely", true);
  testing::write_text(dir / "m" / "a.jsonl", good.dump() + "\nnot json\n");
  testing::write_text(dir / "m" / "a.jsonl.errors.jsonl", "{\"line\": 2}\n");
  std::size_t skipped = 0;
  const auto rs = commands::load_records_dir(dir.path(), &skipped);
  EXPECT_EQ(rs.size(), 1u);
  EXPECT_EQ(skipped, 1u);
  EXPECT_THROW(commands::load_records_dir(dir / "absent"), DataError);
}

TEST(Commands, ProfileFromJson) {
  const auto p = commands::profile_from_json(
      json{{"markers", {{{"text", "x"}, {"accuracy", 0.6}, {"weight", 1.0}}}}, {"datasets", {"d"}}, {"n_records", 5}});
  EXPECT_EQ(p.markers.size(), 1u);
  EXPECT_EQ(p.n_records, 5);
  EXPECT_THROW(commands::profile_from_json(json{{"markers", 1}}), UsageError);
}

}  // namespace
}  // namespace epimark
