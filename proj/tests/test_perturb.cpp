#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "clucert/embedding.hpp"
#include "clucert/lexicon.hpp"
#include "clucert/perturb.hpp"
#include "clucert/rng.hpp"
#include "clucert/text.hpp"

using namespace clucert;

namespace {

Lexicon test_lexicon() {
  return Lexicon::from_json_text(R"({
    "good": ["great", "fine", "decent"],
    "movie": ["film", "picture"],
    "story": ["tale"],
    "bad": ["poor", "awful"],
    "the": []
  })");
}

}  // namespace

TEST_CASE("tokenize and sentence validation") {
  const auto s = tokenize_text("  a good\tmovie \n");
  CHECK(s.tokens == std::vector<std::string>{"a", "good", "movie"});
  CHECK(detokenize(s) == "a good movie");
  CHECK_THROWS_AS(tokenize_text("   "), std::invalid_argument);
  CHECK_THROWS_AS(tokenize_text("a [MASK] b"), std::invalid_argument);
  CHECK(hamming_distance(tokenize_text("a b c"), tokenize_text("a x c")) == 1);
  CHECK_THROWS_AS(hamming_distance(tokenize_text("a b"), tokenize_text("a")),
                  std::invalid_argument);
}

TEST_CASE("retention_count floor semantics") {
  CHECK(retention_count(5, 0.4) == 3);  // floor(0.6 * 5)
  CHECK(retention_count(5, 0.0) == 5);
  CHECK(retention_count(7, 0.5) == 3);  // floor(3.5)
  CHECK(retention_count(10, 1.0) == 0);
  CHECK_THROWS_AS(retention_count(5, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(retention_count(5, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(retention_count(0, 0.5), std::invalid_argument);
}

TEST_CASE("mask keeps retained positions and masks the rest") {
  const Sentence s({"A", "B", "C", "D", "E"});
  CHECK(mask(s, {{0, 2, 4}, 5}).tokens ==
        std::vector<std::string>{"A", "[MASK]", "C", "[MASK]", "E"});
  CHECK(mask(s, {{0, 1, 2, 3, 4}, 5}) == s);
  CHECK(mask(s, {{}, 5}).tokens ==
        std::vector<std::string>{"[MASK]", "[MASK]", "[MASK]", "[MASK]", "[MASK]"});
  CHECK_THROWS_AS(mask(s, {{7}, 5}), std::invalid_argument);
  CHECK_THROWS_AS(mask(s, {{0}, 4}), std::invalid_argument);
}

TEST_CASE("sample_retention draws s distinct positions") {
  const auto r = sample_retention(10, 4, 99);
  CHECK(r.positions.size() == 4);
  CHECK(std::set<int>(r.positions.begin(), r.positions.end()).size() == 4);
  for (int p : r.positions) CHECK((p >= 0 && p < 10));
  CHECK(sample_retention(10, 4, 99).positions == r.positions);
}

TEST_CASE("score_candidate equals an independent cosine computation") {
  OfflineHashEmbedder embedder;
  const Sentence s({"a", "good", "movie"});

  CHECK(score_candidate(s, 1, "good", embedder) == doctest::Approx(1.0).epsilon(1e-12));

  Sentence changed = s;
  changed.tokens[1] = "great";
  const double expect = cosine(embedder.embed(s), embedder.embed(changed));
  CHECK(score_candidate(s, 1, "great", embedder) == expect);
  CHECK(expect >= -1.0);
  CHECK(expect <= 1.0);

  CHECK_THROWS_AS(score_candidate(s, 9, "x", embedder), std::invalid_argument);
  CHECK_THROWS_AS(score_candidate(s, 1, "", embedder), std::invalid_argument);
}

TEST_CASE("substitute basics") {
  OfflineHashEmbedder embedder;
  const auto lex = test_lexicon();
  const Sentence s({"the", "good", "movie", "has", "story"});

  SUBCASE("mask rate zero is the identity") {
    const auto out = substitute(s, 0.0, lex, embedder, 0.5, 7);
    CHECK(out.sentence == s);
    CHECK(out.substituted_positions.empty());
  }

  SUBCASE("tokens absent from the lexicon are preserved") {
    // budget = n, so every position is drawn; "has" has no entry, "the" has an
    // empty candidate list
    const auto out = substitute_budget(s, 5, lex, embedder, -1.0, 11);
    CHECK(out.sentence.tokens[0] == "the");
    CHECK(out.sentence.tokens[3] == "has");
    for (int pos : out.substituted_positions) {
      CHECK(out.sentence.tokens[static_cast<size_t>(pos)] !=
            s.tokens[static_cast<size_t>(pos)]);
    }
  }

  SUBCASE("fixed seed is bit-identical, neighbor seeds differ") {
    const auto a = substitute(s, 0.6, lex, embedder, -1.0, 42);
    const auto b = substitute(s, 0.6, lex, embedder, -1.0, 42);
    CHECK(a.sentence == b.sentence);
    CHECK(a.substituted_positions == b.substituted_positions);
    bool all_equal = true;
    for (uint64_t seed = 100; seed < 120; ++seed) {
      const auto c = substitute(s, 0.6, lex, embedder, -1.0, seed);
      const auto d = substitute(s, 0.6, lex, embedder, -1.0, seed + 1);
      if (!(c.sentence == d.sentence)) all_equal = false;
    }
    CHECK(!all_equal);
  }

  SUBCASE("length preservation and locality") {
    for (uint64_t seed = 0; seed < 40; ++seed) {
      const auto out = substitute(s, 0.8, lex, embedder, -1.0, seed);
      REQUIRE(out.sentence.size() == s.size());
      std::set<int> subst(out.substituted_positions.begin(),
                          out.substituted_positions.end());
      for (size_t i = 0; i < s.size(); ++i) {
        if (!subst.count(static_cast<int>(i)))
          CHECK(out.sentence.tokens[i] == s.tokens[i]);
      }
      CHECK(static_cast<long>(out.substituted_positions.size()) <= floor_eps(0.8 * 5));
    }
  }

  SUBCASE("raising tau never increases the substituted count") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
      size_t prev = SIZE_MAX;
      for (double tau : {-1.0, 0.2, 0.6, 0.9, 0.999}) {
        const auto out = substitute(s, 0.8, lex, embedder, tau, seed);
        CHECK(out.substituted_positions.size() <= prev);
        prev = out.substituted_positions.size();
      }
    }
  }
}

TEST_CASE("large batch on a 50-token sentence preserves length everywhere") {
  OfflineHashEmbedder embedder;
  Lexicon lex;
  std::vector<std::string> tokens;
  for (int i = 0; i < 50; ++i) {
    tokens.push_back("w" + std::to_string(i));
    if (i % 3 == 0) lex.add(tokens.back(), {"s" + std::to_string(i)});
  }
  const Sentence s{Sentence(tokens)};
  const auto batch = sample_batch(s, 1000, 0.3, lex, embedder, -1.0, 555);
  REQUIRE(batch.size() == 1000);
  for (const auto& p : batch) {
    REQUIRE(p.sentence.size() == 50);
    CHECK(static_cast<long>(p.substituted_positions.size()) <= floor_eps(0.3 * 50));
  }
}

TEST_CASE("sample_batch reproducibility and shape") {
  OfflineHashEmbedder embedder;
  const auto lex = test_lexicon();
  const Sentence s({"the", "good", "movie", "has", "story"});

  const auto batch = sample_batch(s, 50, 0.6, lex, embedder, -1.0, 1234);
  REQUIRE(batch.size() == 50);
  for (const auto& p : batch) CHECK(p.sentence.size() == s.size());

  // first sample equals a direct substitute with the first derived seed
  const auto first = substitute(s, 0.6, lex, embedder, -1.0, derive_seed(1234, 0));
  CHECK(batch[0].sentence == first.sentence);

  const auto batch2 = sample_batch(s, 50, 0.6, lex, embedder, -1.0, 1234);
  for (size_t i = 0; i < batch.size(); ++i)
    CHECK(batch[i].sentence == batch2[i].sentence);

  const auto batch3 = sample_batch(s, 50, 0.6, lex, embedder, -1.0, 1235);
  bool identical = true;
  for (size_t i = 0; i < batch.size(); ++i)
    if (!(batch[i].sentence == batch3[i].sentence)) identical = false;
  CHECK(!identical);
}

TEST_CASE("lexicon loading") {
  const auto lex = test_lexicon();
  REQUIRE(lex.candidates("good") != nullptr);
  CHECK(lex.candidates("good")->size() == 3);
  CHECK(lex.candidates("missing") == nullptr);
  CHECK(lex.candidates("the")->empty());

  // self-candidates are dropped
  const auto self = Lexicon::from_json_text(R"({"x": ["x", "y"]})");
  CHECK(*self.candidates("x") == std::vector<std::string>{"y"});

  const auto folded = Lexicon::from_json_text(R"({"Good": ["Great"]})", true);
  REQUIRE(folded.candidates("good") != nullptr);
  CHECK(*folded.candidates("good") == std::vector<std::string>{"great"});

  CHECK_THROWS(Lexicon::from_json_text("not json"));
  CHECK_THROWS(Lexicon::from_json_text(R"(["array"])"));
  CHECK_THROWS(Lexicon::from_json_text(R"({"x": "notarray"})"));
}

TEST_CASE("score cache stores and hits") {
  ScoreCache cache;
  double v = 0.0;
  CHECK(!cache.lookup(3, "word", &v));
  cache.store(3, "word", 0.75);
  REQUIRE(cache.lookup(3, "word", &v));
  CHECK(v == 0.75);
  CHECK(!cache.lookup(4, "word", &v));
}
