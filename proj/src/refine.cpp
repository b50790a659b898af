#include "clucert/refine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace clucert {
namespace {

std::string lower_ascii(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// level text -> 3/2/1/0; -1 when unrecognized. Longest names first so that
// "very important" does not fall through to "important".
int parse_level(const std::string& text) {
  const std::string t = lower_ascii(trim(text));
  if (t.find("very important") != std::string::npos) return 3;
  if (t.find("less important") != std::string::npos) return 1;
  if (t.find("not important") != std::string::npos) return 0;
  if (t.find("important") != std::string::npos) return 2;
  return -1;
}

}  // namespace

ImportanceScores OfflineScorer::score(const Sentence& s) {
  validate_sentence(s);
  const double n = static_cast<double>(s.size());
  ImportanceScores out;
  out.scorer_id = id();
  out.scores.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    const double position = static_cast<double>(i + 1);  // 1-based
    out.scores.push_back(static_cast<double>(s.tokens[i].size()) +
                         0.001 * (n - position));
  }
  return out;
}

const std::vector<std::string>& LlmScorer::importance_prompts() {
  static const std::vector<std::string> prompts = {
      "Please classify each word in the sentence into one of four levels based on "
      "its importance to the overall sentiment: Very Important, Important, Less "
      "Important, or Not Important.",
      "Assign an importance level (Very Important, Important, Less Important, Not "
      "Important) to each word depending on how strongly it affects the sentiment "
      "of the sentence.",
      "For every word in the sentence, evaluate its influence on the emotional tone "
      "and categorize it as either Very Important, Important, Less Important, or "
      "Not Important.",
      "Which words carry the core sentiment of the sentence? Please group all words "
      "into four categories according to their emotional contribution.",
      "Label each word in the sentence as Very Important, Important, Less Important, "
      "or Not Important, based on how necessary it is for understanding the "
      "sentence's meaning.",
      "Which words in this sentence are the least meaningful or most negligible in "
      "terms of semantic contribution? Please assign all words to four importance "
      "levels accordingly.",
  };
  return prompts;
}

LlmScorer::LlmScorer(ChatTransport& transport, QueryCache* cache, size_t num_prompts)
    : transport_(transport), cache_(cache), num_prompts_(num_prompts) {
  const size_t available = importance_prompts().size();
  if (num_prompts_ == 0 || num_prompts_ > available) num_prompts_ = available;
}

std::vector<int> LlmScorer::parse_levels(const Sentence& s, const std::string& response) {
  std::vector<int> levels(s.size(), 0);
  std::vector<bool> assigned(s.size(), false);
  std::istringstream lines(response);
  std::string line;
  while (std::getline(lines, line)) {
    const size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string word = trim(line.substr(0, colon));
    const int level = parse_level(line.substr(colon + 1));
    if (word.empty() || level < 0) continue;
    // earliest unassigned occurrence of this word
    for (size_t i = 0; i < s.size(); ++i) {
      if (!assigned[i] && s.tokens[i] == word) {
        levels[i] = level;
        assigned[i] = true;
        break;
      }
    }
  }
  return levels;
}

ImportanceScores LlmScorer::score(const Sentence& s) {
  validate_sentence(s);
  std::vector<double> total(s.size(), 0.0);
  for (size_t p = 0; p < num_prompts_; ++p) {
    const std::string prompt =
        importance_prompts()[p] + "\n\nSentence:\n" + detokenize(s) +
        "\n\nAnswer with one line per word, in the original order, formatted "
        "exactly as \"word: level\".";
    std::string response;
    const std::string endpoint = transport_.endpoint_id();
    const std::string model = transport_.model_name();
    bool from_cache = false;
    if (cache_) {
      if (auto hit = cache_->get(endpoint, model, 0.0, prompt)) {
        response = *hit;
        from_cache = true;
      }
    }
    if (!from_cache) {
      ++queries_;
      response = transport_.complete(prompt);
      if (cache_) cache_->put(endpoint, model, 0.0, prompt, response);
    }
    const auto levels = parse_levels(s, response);
    for (size_t i = 0; i < s.size(); ++i)
      total[i] += static_cast<double>(levels[i]);
  }
  ImportanceScores out;
  out.scorer_id = id();
  out.scores.resize(s.size());
  for (size_t i = 0; i < s.size(); ++i)
    out.scores[i] = total[i] / static_cast<double>(num_prompts_);
  return out;
}

RefinedSentence refine(const Sentence& s, const ImportanceScores& scores,
                       long target_length) {
  validate_sentence(s);
  if (target_length < 1) throw std::invalid_argument("refine: target length must be >= 1");
  if (scores.scores.size() != s.size())
    throw std::invalid_argument("refine: scores misaligned with sentence");
  for (double v : scores.scores)
    if (!std::isfinite(v)) throw std::invalid_argument("refine: non-finite score");

  RefinedSentence out;
  out.original_length = static_cast<long>(s.size());
  const size_t keep = std::min(static_cast<size_t>(target_length), s.size());

  std::vector<int> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores.scores[static_cast<size_t>(a)] > scores.scores[static_cast<size_t>(b)];
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  out.kept_positions = order;
  for (int pos : order) out.sentence.tokens.push_back(s.tokens[static_cast<size_t>(pos)]);
  return out;
}

RefinedSentence refine_with_scorer(const Sentence& s, ImportanceScorer& scorer,
                                   long target_length) {
  return refine(s, scorer.score(s), target_length);
}

}  // namespace clucert
