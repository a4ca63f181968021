#include <gtest/gtest.h>

#include <set>

#include "epimark/ingest.hpp"
#include "epimark/json_io.hpp"
#include "helpers.hpp"

namespace epimark::ingest {
namespace {

using testing::TempDir;
using testing::write_text;

const char* const kBeetles =
    "Each bird eats 12 beetles per day, each snake eats 3 birds per day, and each jaguar eats 5 snakes per day. "
    "If there are 6 jaguars in a forest, how many beetles are eaten each day?";
const char* const kLetters =
    "James writes a 3 - page letter to 2 different friends twice a week. How many pages does he write a year?";

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

TEST(Gsm8k, ParseGold) {
  EXPECT_EQ(parse_gsm8k_gold("6 * 5 = 30\n#### 1,080"), 1080);
  EXPECT_EQ(parse_gsm8k_gold("#### -4"), -4);
  EXPECT_THROW(parse_gsm8k_gold("no marker"), DataError);
  EXPECT_THROW(parse_gsm8k_gold("#### 3.5"), DataError);
}

TEST(Gsm8k, ReferenceSamplesVerbatim) {
  const auto yes = binarize_gsm8k({kBeetles, 1080}, 0, 42);
  EXPECT_EQ(yes.question_text,
            "For the question `Each bird eats 12 beetles per day, each snake eats 3 birds per day, and each jaguar "
            "eats 5 snakes per day. If there are 6 jaguars in a forest, how many beetles are eaten each day?', is "
            "the answer 1080 its correct answer?");
  EXPECT_EQ(yes.gold_answer, "yes");

  const auto no = binarize_gsm8k({kLetters, 624}, 1, 42, 223);
  EXPECT_EQ(no.question_text,
            "For the question `James writes a 3 - page letter to 2 different friends twice a week. How many pages "
            "does he write a year?', is the answer 223 its correct answer?");
  EXPECT_EQ(no.gold_answer, "no");
  EXPECT_THROW(binarize_gsm8k({kLetters, 624}, 1, 42, 624), DataError);
}

TEST(Gsm8k, HundredItemsSplitEvenly) {
  int yes = 0, no = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const std::int64_t gold = static_cast<std::int64_t>(i * 7 % 23);
    const auto item = binarize_gsm8k({"Q" + std::to_string(i), gold}, i, 5);
    if (item.gold_answer == "yes") {
      ++yes;
      EXPECT_NE(item.question_text.find("is the answer " + std::to_string(gold) + " its"), std::string::npos);
    } else {
      ++no;
      EXPECT_EQ(item.question_text.find("is the answer " + std::to_string(gold) + " its"), std::string::npos);
    }
    EXPECT_TRUE(validate_item(item).empty());
  }
  EXPECT_EQ(yes, 50);
  EXPECT_EQ(no, 50);
}

TEST(Gsm8k, DistractorNeverEqualsGoldAndIsSeeded) {
  for (std::int64_t gold : {0, 1, 7, 624, -3, 100000}) {
    for (std::size_t i = 0; i < 200; ++i) {
      const auto d = gsm8k_distractor(gold, i, 11);
      EXPECT_NE(d, gold);
      if (gold >= 0) {
        EXPECT_GE(d, 0);
      }
      EXPECT_LE(std::abs(d - gold), 2 * std::abs(gold) + 10);
      EXPECT_EQ(d, gsm8k_distractor(gold, i, 11));
    }
  }
}

TEST(Gsm8k, PrepareFromFiles) {
  TempDir dir;
  std::vector<json> rows;
  for (int i = 0; i < 11; ++i) rows.push_back({{"question", "Q" + std::to_string(i)}, {"answer", "x\n#### 12"}});
  write_text(dir / "train.jsonl", jsonl(rows));
  write_text(dir / "test.jsonl", jsonl({rows[0], rows[1]}));
  const auto p = prepare_dataset({"gsm8k", dir.path(), 1, std::nullopt});
  ASSERT_EQ(p.train.size(), 11u);
  int yes = 0;
  for (const auto& it : p.train) yes += it.gold_answer == "yes";
  EXPECT_EQ(yes, 6);
  EXPECT_EQ(p.test.front().split, Split::test);
}

TEST(CaseHold, PositionalEightyTwentySplit) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 10495; ++i) {
    json row{{"citing_prompt", "case " + std::to_string(i)}, {"label", i % 5}};
    for (int h = 0; h < 5; ++h) row["holding_" + std::to_string(h)] = "h" + std::to_string(h);
    text += row.dump() + "\n";
  }
  write_text(dir / "casehold.jsonl", text);
  const auto p = prepare_dataset({"casehold", dir / "casehold.jsonl", 3, std::nullopt});
  EXPECT_EQ(p.train.size(), 8396u);
  EXPECT_EQ(p.test.size(), 2099u);
  EXPECT_EQ(p.train.front().question_text, "case 0");
  EXPECT_EQ(p.train.back().question_text, "case 8395");
  EXPECT_EQ(p.test.front().question_text, "case 8396");
  EXPECT_EQ(p.test.front().split, Split::test);
  EXPECT_EQ(p.train[2].gold_answer, "C");
}

TEST(MedMcqa, SingleAnswerSubsetAndDefaultSizes) {
  TempDir dir;
  auto rows = [](int n, const std::string& prefix) {
    std::string text;
    for (int i = 0; i < n; ++i) {
      json row{{"id", prefix + std::to_string(i)},
               {"question", "q"},
               {"opa", "a"},
               {"opb", "b"},
               {"opc", "c"},
               {"opd", "d"},
               {"cop", i % 4},
               {"choice_type", i % 10 == 0 ? "multi" : "single"}};
      text += row.dump() + "\n";
    }
    return text;
  };
  write_text(dir / "train.jsonl", rows(11000, "tr"));
  write_text(dir / "test.jsonl", rows(3000, "te"));
  const auto p = prepare_dataset({"medmcqa", dir.path(), 9, std::nullopt});
  EXPECT_EQ(p.train.size(), 9686u);
  EXPECT_EQ(p.test.size(), 2422u);
  for (const auto& it : p.train) {
    const int idx = std::stoi(it.item_id.substr(2));
    ASSERT_NE(idx % 10, 0) << "multi-answer row kept";
  }
  const auto again = prepare_dataset({"medmcqa", dir.path(), 9, std::nullopt});
  EXPECT_EQ(again.train, p.train);
  const auto other = prepare_dataset({"medmcqa", dir.path(), 10, std::nullopt});
  EXPECT_NE(other.train, p.train);
}

TEST(Mmlu, SamplesTwentyThousandAndKeepsTest) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 20500; ++i)
    text += json{{"question", "q" + std::to_string(i)}, {"choices", {"w", "x", "y", "z"}}, {"answer", i % 4}}.dump() +
            "\n";
  write_text(dir / "train.jsonl", text);
  write_text(dir / "test.jsonl", json{{"question", "t"}, {"choices", {"w", "x"}}, {"answer", 1}}.dump() + "\n");
  const auto p = prepare_dataset({"mmlu", dir.path(), 2, std::nullopt});
  EXPECT_EQ(p.train.size(), 20000u);
  ASSERT_EQ(p.test.size(), 1u);
  EXPECT_EQ(p.test.front().gold_answer, "B");
  std::set<std::string> ids;
  for (const auto& it : p.train) ids.insert(it.item_id);
  EXPECT_EQ(ids.size(), 20000u);
}

TEST(BinaryAdapters, BoolqAndStrategyqa) {
  TempDir dir;
  write_text(dir / "b" / "train.jsonl",
             R"({"question": "is it", "answer": true, "passage": "long text"})" "\n"
             R"({"question": "is it not", "answer": false})" "\n");
  write_text(dir / "b" / "test.jsonl", R"({"question": "t", "answer": "true"})" "\n");
  const auto b = prepare_dataset({"boolq", dir / "b", 0, std::nullopt});
  ASSERT_EQ(b.train.size(), 2u);
  EXPECT_EQ(b.train[0].gold_answer, "yes");
  EXPECT_EQ(b.train[1].gold_answer, "no");
  EXPECT_EQ(b.train[0].question_text, "is it");
  EXPECT_EQ(b.test[0].gold_answer, "yes");

  write_text(dir / "s" / "train.jsonl", R"({"qid": "abc", "question": "q", "answer": false})" "\n");
  write_text(dir / "s" / "test.jsonl", R"({"qid": "def", "question": "q", "answer": true})" "\n");
  const auto s = prepare_dataset({"strategyqa", dir / "s", 0, std::nullopt});
  EXPECT_EQ(s.train[0].item_id, "abc");
}

TEST(Csqa, LabelsAndKey) {
  TempDir dir;
  const std::string row =
      R"({"id": "c1", "question": "q", "choices": {"label": ["A","B","C"], "text": ["x","y","z"]}, "answerKey": "C"})";
  write_text(dir / "train.jsonl", row + "\n");
  write_text(dir / "test.jsonl", "");
  const auto p = prepare_dataset({"csqa", dir.path(), 0, std::nullopt});
  ASSERT_EQ(p.train.size(), 1u);
  EXPECT_EQ(p.train[0].gold_answer, "C");
  EXPECT_EQ(p.train[0].options.size(), 3u);
  EXPECT_TRUE(p.test.empty());
}

TEST(Prepare, Errors) {
  TempDir dir;
  EXPECT_THROW(prepare_dataset({"squad", dir.path(), 0, std::nullopt}), DataError);
  EXPECT_THROW(prepare_dataset({"boolq", dir.path(), 0, std::nullopt}), DataError);
  write_text(dir / "train.jsonl", "{bad\n");
  write_text(dir / "test.jsonl", "");
  EXPECT_THROW(prepare_dataset({"boolq", dir.path(), 0, std::nullopt}), DataError);
  write_text(dir / "train.jsonl", R"({"question": "q"})" "\n");
  EXPECT_THROW(prepare_dataset({"boolq", dir.path(), 0, std::nullopt}), DataError);
  write_text(dir / "train.jsonl", R"({"question": "q", "answer": true})" "\n");
  EXPECT_THROW(prepare_dataset({"boolq", dir.path(), 0, SampleSizes{5, 0}}), DataError);
}

TEST(Prepare, OverlappingIdsRejected) {
  TempDir dir;
  write_text(dir / "train.jsonl", R"({"qid": "x", "question": "q", "answer": true})" "\n");
  write_text(dir / "test.jsonl", R"({"qid": "x", "question": "q", "answer": true})" "\n");
  EXPECT_THROW(prepare_dataset({"strategyqa", dir.path(), 0, std::nullopt}), DataError);
}

}  // namespace
}  // namespace epimark::ingest
