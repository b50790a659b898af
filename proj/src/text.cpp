#include "clucert/text.hpp"

#include <cctype>
#include <stdexcept>

namespace clucert {

Sentence tokenize_text(const std::string& text) {
  Sentence s;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        s.tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) s.tokens.push_back(cur);
  validate_sentence(s);
  return s;
}

void validate_sentence(const Sentence& s) {
  if (s.empty()) throw std::invalid_argument("sentence is empty");
  for (const auto& tok : s.tokens) {
    if (tok.empty()) throw std::invalid_argument("sentence contains an empty token");
    if (tok == kMaskToken)
      throw std::invalid_argument("sentence contains the reserved [MASK] token");
    for (char c : tok) {
      if (std::isspace(static_cast<unsigned char>(c)))
        throw std::invalid_argument("token contains whitespace: '" + tok + "'");
    }
  }
}

std::string detokenize(const Sentence& s) {
  std::string out;
  for (size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += s.tokens[i];
  }
  return out;
}

long hamming_distance(const Sentence& a, const Sentence& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("hamming_distance: sentence lengths differ");
  long d = 0;
  for (size_t i = 0; i < a.size(); ++i)
    if (a.tokens[i] != b.tokens[i]) ++d;
  return d;
}

}  // namespace clucert
