#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "clucert/refine.hpp"

using namespace clucert;

TEST_CASE("offline scorer follows the documented formula") {
  OfflineScorer scorer;
  const Sentence s({"an", "amazing", "plot"});
  const auto scores = scorer.score(s);
  REQUIRE(scores.scores.size() == 3);
  // length + 0.001 * (n - 1-based position), n = 3
  CHECK(scores.scores[0] == doctest::Approx(2.0 + 0.001 * 2).epsilon(1e-12));
  CHECK(scores.scores[1] == doctest::Approx(7.0 + 0.001 * 1).epsilon(1e-12));
  CHECK(scores.scores[2] == doctest::Approx(4.0 + 0.001 * 0).epsilon(1e-12));
  CHECK(scores.scorer_id == "offline");

  const auto single = scorer.score(Sentence({"word"}));
  CHECK(single.scores.size() == 1);
}

TEST_CASE("refine keeps the top-L tokens in original order") {
  const Sentence s({"a", "bb", "ccc", "dddd", "ee"});
  SUBCASE("short sentences pass through unchanged") {
    OfflineScorer scorer;
    const auto r = refine_with_scorer(s, scorer, 10);
    CHECK(r.sentence == s);
    CHECK(r.kept_positions == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(r.original_length == 5);
  }
  SUBCASE("strictly decreasing scores keep the first L tokens") {
    ImportanceScores scores{{5, 4, 3, 2, 1}, "test"};
    const auto r = refine(s, scores, 3);
    CHECK(r.sentence.tokens == std::vector<std::string>{"a", "bb", "ccc"});
    CHECK(r.kept_positions == std::vector<int>{0, 1, 2});
  }
  SUBCASE("all-equal scores tie-break toward earlier positions") {
    ImportanceScores scores{{1, 1, 1, 1}, "test"};
    const auto r = refine(Sentence({"w", "x", "y", "z"}), scores, 2);
    CHECK(r.sentence.tokens == std::vector<std::string>{"w", "x"});
  }
  SUBCASE("selection picks high scores wherever they sit") {
    ImportanceScores scores{{0.1, 9.0, 0.2, 8.0, 0.3}, "test"};
    const auto r = refine(s, scores, 2);
    CHECK(r.sentence.tokens == std::vector<std::string>{"bb", "dddd"});
    CHECK(r.kept_positions == std::vector<int>{1, 3});
  }
  SUBCASE("errors") {
    ImportanceScores bad{{1.0, 2.0}, "test"};
    CHECK_THROWS_AS(refine(s, bad, 3), std::invalid_argument);
    ImportanceScores scores{{1, 2, 3, 4, 5}, "test"};
    CHECK_THROWS_AS(refine(s, scores, 0), std::invalid_argument);
  }
}

TEST_CASE("refine output length and subsequence invariants") {
  OfflineScorer scorer;
  for (int n = 1; n <= 12; ++n) {
    std::vector<std::string> tokens;
    for (int i = 0; i < n; ++i)
      tokens.push_back(std::string(static_cast<size_t>(1 + (i * 7) % 5), 'a') +
                       std::to_string(i));
    const Sentence s{Sentence(tokens)};
    for (long L : {1L, 3L, 20L}) {
      const auto r = refine_with_scorer(s, scorer, L);
      CHECK(static_cast<long>(r.sentence.size()) ==
            std::min(L, static_cast<long>(n)));
      for (size_t i = 1; i < r.kept_positions.size(); ++i)
        CHECK(r.kept_positions[i - 1] < r.kept_positions[i]);
      for (size_t i = 0; i < r.kept_positions.size(); ++i)
        CHECK(r.sentence.tokens[i] ==
              s.tokens[static_cast<size_t>(r.kept_positions[i])]);
    }
  }
}

TEST_CASE("argtop-L selection is invariant under positive scaling") {
  const Sentence s({"p", "q", "r", "s", "t", "u"});
  ImportanceScores scores{{0.3, 2.5, 0.1, 2.5, 1.0, 0.7}, "test"};
  const auto base = refine(s, scores, 3);
  for (double c : {0.001, 7.0, 1234.5}) {
    ImportanceScores scaled = scores;
    for (auto& v : scaled.scores) v *= c;
    CHECK(refine(s, scaled, 3).kept_positions == base.kept_positions);
  }
}

TEST_CASE("llm scorer maps levels and averages across prompts") {
  const Sentence s({"great", "film", "tonight"});

  SUBCASE("a stub that always answers Very Important gives all 3.0") {
    FixedTransport transport(
        "great: Very Important\nfilm: Very Important\ntonight: Very Important");
    LlmScorer scorer(transport, nullptr, 2);
    const auto scores = scorer.score(s);
    for (double v : scores.scores) CHECK(v == 3.0);
    CHECK(scorer.queries_used() == 2);
  }

  SUBCASE("levels map to 3/2/1/0 and missing tokens get 0") {
    FixedTransport transport("great: Very Important\nfilm: Less Important");
    LlmScorer scorer(transport, nullptr, 1);
    const auto scores = scorer.score(s);
    CHECK(scores.scores[0] == 3.0);
    CHECK(scores.scores[1] == 1.0);
    CHECK(scores.scores[2] == 0.0);  // absent from the response
  }

  SUBCASE("unparseable lines default to Not Important") {
    FixedTransport transport("great: %%%\nfilm Important\ntonight: Important");
    LlmScorer scorer(transport, nullptr, 1);
    const auto scores = scorer.score(s);
    CHECK(scores.scores[0] == 0.0);  // unrecognized level text
    CHECK(scores.scores[1] == 0.0);  // no colon, line ignored
    CHECK(scores.scores[2] == 2.0);
  }

  SUBCASE("duplicate tokens are matched in order") {
    const Sentence dup({"fine", "fine"});
    FixedTransport transport("fine: Important\nfine: Not Important");
    LlmScorer scorer(transport, nullptr, 1);
    const auto scores = scorer.score(dup);
    CHECK(scores.scores[0] == 2.0);
    CHECK(scores.scores[1] == 0.0);
  }
}

TEST_CASE("llm scorer parse_levels distinguishes the overlapping level names") {
  const Sentence s({"a", "b", "c", "d"});
  const auto levels = LlmScorer::parse_levels(
      s, "a: very important\nb: IMPORTANT\nc: less important\nd: not important");
  CHECK(levels == std::vector<int>{3, 2, 1, 0});
}
