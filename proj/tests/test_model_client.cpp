#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "clucert/model_client.hpp"

using namespace clucert;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string golden_dir() {
#ifdef CLUCERT_GOLDEN_DIR
  return CLUCERT_GOLDEN_DIR;
#else
  return "tests/golden";
#endif
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = std::string("/tmp/clucert_test_") + name + "_" +
           std::to_string(::getpid());
    std::remove(path.c_str());
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("render_prompt matches the golden files byte for byte") {
  const auto check_golden = [&](const char* task_id, const char* input,
                                const char* file) {
    const auto env = render_prompt(make_task(task_id), input);
    CHECK(env.rendered == read_file(golden_dir() + "/" + file));
  };
  check_golden("sentiment2", "a touching and heartfelt film", "prompt_sentiment2.txt");
  check_golden("topic4", "shares rallied after the earnings report",
               "prompt_topic4.txt");
  check_golden("math_numeric",
               "Tom has 3 apples and buys 4 more. How many apples does he have?",
               "prompt_math_numeric.txt");
}

TEST_CASE("render_prompt structure and determinism") {
  const auto task = make_task("sentiment2");
  const auto env = render_prompt(task, "good movie");
  const size_t i1 = env.rendered.find("###Instruction:");
  const size_t i2 = env.rendered.find("###Input:");
  const size_t i3 = env.rendered.find("###Response:");
  REQUIRE(i1 != std::string::npos);
  REQUIRE(i2 != std::string::npos);
  REQUIRE(i3 != std::string::npos);
  CHECK(i1 < i2);
  CHECK(i2 < i3);
  CHECK(env.rendered == render_prompt(task, "good movie").rendered);

  const auto topic = make_task("topic4");
  for (const char* name : {"Sports", "World", "Technology", "Business"})
    CHECK(topic.instruction_text.find(name) != std::string::npos);

  CHECK_THROWS_AS(render_prompt(task, ""), std::invalid_argument);
  CHECK_THROWS_AS(make_task("nosuch"), std::invalid_argument);
}

TEST_CASE("parse_response keyword rule") {
  const auto task = make_task("sentiment2");
  CHECK(parse_response("The sentiment is Negative.", task) == "negative");
  CHECK(parse_response("POSITIVE", task) == "positive");
  CHECK(parse_response("positive and negative", task) == kOtherLabel);
  CHECK(parse_response("no label here", task) == kOtherLabel);
  CHECK(parse_response("", task) == kOtherLabel);

  const auto topic = make_task("topic4");
  CHECK(parse_response("This is about sports.", topic) == "Sports");
  CHECK(parse_response("World news about business", topic) == kOtherLabel);
}

TEST_CASE("parse_response numeric rule") {
  const auto task = make_task("math_numeric");
  CHECK(parse_response("So the answer is 42.", task) == "42");
  CHECK(parse_response("12 plus 13 makes 25", task) == "25");
  CHECK(parse_response("the total is 1,234 dollars", task) == "1234");
  CHECK(parse_response("about -3.50", task) == "-3.5");
  CHECK(parse_response("roughly .5 units", task) == "0.5");
  CHECK(parse_response("no numbers at all", task) == kOtherLabel);
}

TEST_CASE("parse_response is total on arbitrary byte strings") {
  const auto sentiment = make_task("sentiment2");
  const auto math = make_task("math_numeric");
  uint64_t state = 0x12345;
  for (int trial = 0; trial < 500; ++trial) {
    std::string garbage;
    const int len = static_cast<int>(state % 40);
    for (int i = 0; i < len; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      garbage.push_back(static_cast<char>(state >> 56));
    }
    const std::string a = parse_response(garbage, sentiment);
    CHECK((a == "positive" || a == "negative" || a == kOtherLabel));
    const std::string b = parse_response(garbage, math);
    CHECK(!b.empty());
    CHECK(parse_response(garbage, sentiment) == a);  // deterministic
  }
}

TEST_CASE("canonical_numeric normalization") {
  CHECK(canonical_numeric("1,234.50") == "1234.5");
  CHECK(canonical_numeric("007") == "7");
  CHECK(canonical_numeric("-0") == "0");
  CHECK(canonical_numeric("+3") == "3");
  CHECK(canonical_numeric("0.250") == "0.25");
  CHECK(canonical_numeric("4.") == "4");
  CHECK(canonical_numeric("abc") == "");
  CHECK(canonical_numeric("1.2.3") == "");
}

TEST_CASE("stub classifiers") {
  const Sentence good({"good", "film"});
  const Sentence masked({"[MASK]", "film"});  // built directly; stubs may see masks

  auto constant = make_stub_classifier("constant:A");
  CHECK(constant->classify(good) == "A");
  CHECK(constant->classify(Sentence({"anything"})) == "A");

  auto keyword = make_stub_classifier("keyword:good:A:B");
  CHECK(keyword->classify(good) == "A");
  CHECK(keyword->classify(Sentence({"bad", "film"})) == "B");

  auto position = make_stub_classifier("position:0:good:A:B");
  CHECK(position->classify(good) == "A");
  CHECK(position->classify(masked) == "B");

  auto lipschitz = make_stub_classifier("lipschitz:7:0.1");
  const auto l1 = lipschitz->classify(good);
  CHECK(lipschitz->classify(good) == l1);  // functional determinism
  CHECK((l1 == "A" || l1 == "B"));

  CHECK_THROWS_AS(make_stub_classifier("nosuch:rule"), std::invalid_argument);
}

TEST_CASE("lipschitz synthetic classifier projects the offline embedding") {
  LipschitzSyntheticClassifier clf(11, 0.0);
  OfflineHashEmbedder embedder;
  const Sentence a({"u", "v", "w"});
  const double proj = clf.project(embedder.embed(a));
  CHECK(clf.classify(a) == (proj >= clf.threshold() ? "A" : "B"));
  CHECK(clf.lipschitz_constant() > 0.0);
}

TEST_CASE("chat classifier uses the cache before the transport") {
  const auto task = make_task("sentiment2");
  FixedTransport transport("positive");
  ChatClassifier clf(task, transport, nullptr);
  const Sentence s({"nice", "movie"});
  CHECK(clf.classify(s) == "positive");
  CHECK(transport.calls() == 1);

  SUBCASE("with a cache the second identical call makes no transport call") {
    TempFile cache_file("cache");
    QueryCache cache(cache_file.path);
    FixedTransport t2("positive");
    ChatClassifier cached(task, t2, &cache);
    CHECK(cached.classify(s) == "positive");
    CHECK(cached.classify(s) == "positive");
    CHECK(t2.calls() == 1);
    CHECK(cached.cache_hits() == 1);

    // a fresh cache instance reloads the persisted entry
    QueryCache reloaded(cache_file.path);
    CHECK(reloaded.size() == 1);
    FixedTransport t3("negative");  // must not be consulted
    ChatClassifier replay(task, t3, &reloaded);
    CHECK(replay.classify(s) == "positive");
    CHECK(t3.calls() == 0);
  }

  SUBCASE("transport failure tallies OTHER after the retry budget") {
    FailingTransport failing;
    ChatClassifier broken(task, failing, nullptr);
    CHECK(broken.classify(s) == kOtherLabel);
    CHECK(broken.transport_failures() == 1);
  }
}

TEST_CASE("query cache distinguishes endpoint, model and prompt") {
  QueryCache cache;  // in-memory
  cache.put("e1", "m1", 0.0, "p", "r1");
  cache.put("e2", "m1", 0.0, "p", "r2");
  cache.put("e1", "m2", 0.0, "p", "r3");
  CHECK(cache.get("e1", "m1", 0.0, "p").value() == "r1");
  CHECK(cache.get("e2", "m1", 0.0, "p").value() == "r2");
  CHECK(cache.get("e1", "m2", 0.0, "p").value() == "r3");
  CHECK(!cache.get("e1", "m1", 0.0, "q").has_value());
}
