#include <catch_amalgamated.hpp>

#include <set>
#include <string>
#include <vector>

#include "dmn/data.hpp"
#include "support/world_oracle.hpp"

using dmn::Story;
using dmn::SyntheticKind;
using dmn::Vocab;

namespace {

const char* kMilkBlock =
    "1 Jane went to the hallway.\n"
    "2 Mary walked to the bathroom.\n"
    "3 Sandra went to the garden.\n"
    "4 Daniel went back to the garden.\n"
    "5 Sandra took the milk there.\n"
    "6 Where is the milk?\tgarden\t5\n";

}  // namespace

TEST_CASE("parse_babi reads a five-statement block") {
  auto stories = dmn::parse_babi(kMilkBlock);
  REQUIRE(stories.size() == 1);
  const Story& s = stories[0];
  REQUIRE(s.facts.size() == 5);
  CHECK(s.facts[0].tokens ==
        std::vector<std::string>{"jane", "went", "to", "the", "hallway", "."});
  CHECK(s.facts[4].line == 5);
  CHECK(s.question ==
        std::vector<std::string>{"where", "is", "the", "milk", "?"});
  CHECK(s.answer == std::vector<std::string>{"garden"});
  CHECK(s.supporting == std::vector<int>{5});
  CHECK(s.fact_ordinal(5) == 4);
}

TEST_CASE("parse_babi keeps supporting ids in file order") {
  auto stories = dmn::parse_babi(
      "1 John took the football.\n"
      "2 John went to the hallway.\n"
      "3 Where is the football?\thallway\t1 2\n");
  REQUIRE(stories.size() == 1);
  CHECK(stories[0].supporting == std::vector<int>{1, 2});
}

TEST_CASE("parse_babi accumulates facts across questions in a block") {
  auto stories = dmn::parse_babi(
      "1 Mary went to the kitchen.\n"
      "2 Where is Mary?\tkitchen\t1\n"
      "3 Mary went to the garden.\n"
      "4 Where is Mary?\tgarden\t3\n"
      "1 Bill went to the office.\n"
      "2 Where is Bill?\toffice\t1\n");
  REQUIRE(stories.size() == 3);
  CHECK(stories[0].facts.size() == 1);
  REQUIRE(stories[1].facts.size() == 2);
  CHECK(stories[1].facts[1].line == 3);
  CHECK(stories[1].supporting == std::vector<int>{3});
  CHECK(stories[2].facts.size() == 1);  // id restarting at 1 opened a new block
}

TEST_CASE("parse_babi reports malformed lines with their line number") {
  CHECK_THROWS_WITH(dmn::parse_babi("x Mary went to the kitchen.\n"),
                    Catch::Matchers::ContainsSubstring("line 1"));
  CHECK_THROWS_WITH(
      dmn::parse_babi("1 Mary went to the kitchen.\n2 Where is Mary?\n"),
      Catch::Matchers::ContainsSubstring("line 2"));
  // supporting id that names no statement
  CHECK_THROWS_AS(
      dmn::parse_babi("1 Mary went to the kitchen.\n"
                      "2 Where is Mary?\tkitchen\t7\n"),
      dmn::ParseError);
}

TEST_CASE("multi-token answers split on commas") {
  auto stories = dmn::parse_babi(
      "1 Daniel took the apple.\n"
      "2 Daniel took the football.\n"
      "3 What is Daniel carrying?\tapple,football\t1 2\n");
  CHECK(stories[0].answer == std::vector<std::string>{"apple", "football"});
}

TEST_CASE("serialize then reparse is the identity on stories") {
  auto original = dmn::parse_babi(kMilkBlock);
  auto again = dmn::parse_babi(dmn::serialize_babi(original));
  CHECK(again == original);

  for (auto kind : {SyntheticKind::SingleFact, SyntheticKind::TwoFact,
                    SyntheticKind::Counting, SyntheticKind::Tagging}) {
    auto stories = dmn::generate_synthetic(kind, 41, 50);
    auto round = dmn::parse_babi(dmn::serialize_babi(stories));
    CHECK(round == stories);
  }
}

TEST_CASE("vocab is deterministic, first-occurrence ordered, with reserved ids") {
  auto stories = dmn::generate_synthetic(SyntheticKind::SingleFact, 7, 40);
  auto v1 = Vocab::build(stories);
  auto v2 = Vocab::build(stories);
  CHECK(v1 == v2);

  CHECK(v1.token(v1.end_of_sentence_id()) == Vocab::kEndOfSentence);
  CHECK(v1.token(v1.end_of_sequence_id()) == Vocab::kEndOfSequence);
  CHECK(v1.token(v1.unknown_id()) == Vocab::kUnknown);
  CHECK(v1.id("zeppelin") == v1.unknown_id());

  // size equals distinct corpus tokens plus the three reserved entries
  std::set<std::string> distinct;
  for (const auto& s : stories) {
    for (const auto& f : s.facts) {
      distinct.insert(f.tokens.begin(), f.tokens.end());
    }
    distinct.insert(s.question.begin(), s.question.end());
    distinct.insert(s.answer.begin(), s.answer.end());
  }
  CHECK(v1.size() == distinct.size() + 3);

  // encode/decode round-trips every in-vocab token
  for (std::size_t id = 0; id < v1.size(); ++id) {
    CHECK(v1.id(v1.token(id)) == id);
  }
  CHECK_THROWS_AS(v1.token(v1.size()), dmn::IndexError);
}

TEST_CASE("embedding text loader") {
  dmn::Rng rng(3);
  auto stories = dmn::parse_babi(kMilkBlock);
  auto vocab = Vocab::build(stories);

  const std::string text =
      "the 0.1 0.2 0.3\n"
      "milk -1.5 0 2.25\n";
  auto emb = dmn::load_embeddings<double>(text, vocab, rng);
  CHECK(emb.dim() == 3);
  CHECK(emb.vocab_size() == vocab.size());
  const auto the_id = vocab.id("the");
  CHECK(emb.weights.value.at(0, the_id) == 0.1);
  CHECK(emb.weights.value.at(1, the_id) == 0.2);
  CHECK(emb.weights.value.at(2, the_id) == 0.3);
  const auto milk_id = vocab.id("milk");
  CHECK(emb.weights.value.at(2, milk_id) == 2.25);

  // a token absent from the file keeps a random (non-pretrained) column
  const auto garden_id = vocab.id("garden");
  bool nonzero = false;
  for (std::size_t i = 0; i < 3; ++i) {
    nonzero |= emb.weights.value.at(i, garden_id) != 0.0;
  }
  CHECK(nonzero);

  CHECK_THROWS_WITH(
      dmn::parse_embeddings("the 0.1 0.2 0.3\nmilk 1.0 2.0\n"),
      Catch::Matchers::ContainsSubstring("line 2"));
  CHECK_THROWS_AS(dmn::load_embeddings<double>("", vocab, rng),
                  dmn::ParseError);
}

TEST_CASE("synthetic corpora are bitwise deterministic per seed") {
  for (auto kind : {SyntheticKind::SingleFact, SyntheticKind::TwoFact,
                    SyntheticKind::Counting, SyntheticKind::Tagging}) {
    auto a = dmn::generate_synthetic(kind, 99, 60);
    auto b = dmn::generate_synthetic(kind, 99, 60);
    CHECK(a == b);
    auto c = dmn::generate_synthetic(kind, 100, 60);
    CHECK(a != c);
  }
  CHECK_THROWS_AS(dmn::generate_synthetic(SyntheticKind::SingleFact, 1, 0),
                  dmn::ConfigError);
  CHECK_THROWS_AS(dmn::synthetic_kind_from("mystery"), dmn::ConfigError);
}

TEST_CASE("generated answers and supporting facts match the world replay") {
  for (auto kind : {SyntheticKind::SingleFact, SyntheticKind::TwoFact,
                    SyntheticKind::Counting}) {
    auto stories = dmn::generate_synthetic(kind, 2024, 300);
    for (const auto& s : stories) {
      auto oracle = dmn_test::replay_story(s);
      CHECK(s.answer == oracle.answer);
      CHECK(s.supporting == oracle.supporting);
    }
  }
  auto tagged = dmn::generate_synthetic(SyntheticKind::Tagging, 2024, 200);
  for (const auto& s : tagged) {
    auto oracle = dmn_test::replay_story(s);
    CHECK(s.answer == oracle.answer);
    CHECK(s.answer.size() == s.facts[0].tokens.size());
  }
}

TEST_CASE("two-fact stories always list exactly two supporting facts") {
  auto stories = dmn::generate_synthetic(SyntheticKind::TwoFact, 5, 200);
  for (const auto& s : stories) {
    CHECK(s.supporting.size() == 2);
    for (int line : s.supporting) CHECK_NOTHROW(s.fact_ordinal(line));
  }
}

TEST_CASE("generated corpora stay label balanced") {
  auto count_answers = [](const std::vector<Story>& stories) {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : stories) {
      for (const auto& a : s.answer) ++counts[a];
    }
    return counts;
  };
  auto check_balance = [&](const std::map<std::string, std::size_t>& counts) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& [token, n] : counts) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    CHECK(double(hi - lo) / double(hi) <= 0.10);
  };
  check_balance(count_answers(
      dmn::generate_synthetic(SyntheticKind::SingleFact, 31, 600)));
  check_balance(count_answers(
      dmn::generate_synthetic(SyntheticKind::TwoFact, 32, 600)));
  check_balance(count_answers(
      dmn::generate_synthetic(SyntheticKind::Counting, 33, 600)));
  check_balance(count_answers(
      dmn::generate_synthetic(SyntheticKind::Tagging, 34, 400)));
}

TEST_CASE("synthetic vocabularies stay small") {
  for (auto kind : {SyntheticKind::SingleFact, SyntheticKind::TwoFact,
                    SyntheticKind::Counting, SyntheticKind::Tagging}) {
    auto vocab = Vocab::build(dmn::generate_synthetic(kind, 8, 400));
    CHECK(vocab.size() <= 60);
  }
}

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(dmn::tokenize("Where is John's milk?") ==
        std::vector<std::string>{"where", "is", "john", "'", "s", "milk", "?"});
  CHECK(dmn::tokenize("  spaced   out  ") ==
        std::vector<std::string>{"spaced", "out"});
  CHECK(dmn::tokenize("").empty());
}
