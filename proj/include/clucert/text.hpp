#pragma once

#include <string>
#include <vector>

namespace clucert {

inline constexpr const char* kMaskToken = "[MASK]";

// Ordered token sequence; the unit being certified. Tokens are non-empty and
// whitespace-free; the [MASK] literal is reserved for the mask operation and
// rejected at ingestion.
struct Sentence {
  std::vector<std::string> tokens;

  Sentence() = default;
  explicit Sentence(std::vector<std::string> t) : tokens(std::move(t)) {}

  size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool operator==(const Sentence&) const = default;
};

// Whitespace tokenization; rejects empty input and the reserved [MASK] token.
Sentence tokenize_text(const std::string& text);

// Same rules as tokenize_text, for sentences built programmatically.
void validate_sentence(const Sentence& s);

std::string detokenize(const Sentence& s);

// Number of positions at which two equal-length sentences differ.
long hamming_distance(const Sentence& a, const Sentence& b);

}  // namespace clucert
