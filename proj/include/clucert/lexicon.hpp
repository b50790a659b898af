#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace clucert {

// Merged candidate pool: token -> ordered substitution candidates. Candidate
// lists may be empty; a candidate never equals its key (self-entries are
// dropped at load).
class Lexicon {
 public:
  Lexicon() = default;

  // File format: UTF-8 JSON object {token: [candidate, ...]}. Comparison is
  // exact and case-sensitive unless fold_case lowercases ASCII at load time.
  static Lexicon from_json_file(const std::string& path, bool fold_case = false);
  static Lexicon from_json_text(const std::string& text, bool fold_case = false);

  void add(const std::string& token, std::vector<std::string> candidates);

  // nullptr when the token has no entry.
  const std::vector<std::string>* candidates(const std::string& token) const;

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

}  // namespace clucert
