#include "clucert/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace clucert {
namespace {

std::string lower_ascii(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Lexicon Lexicon::from_json_file(const std::string& path, bool fold_case) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("lexicon: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text, fold_case);
}

Lexicon Lexicon::from_json_text(const std::string& text, bool fold_case) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("lexicon: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("lexicon: top level must be an object");

  Lexicon lex;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_array())
      throw std::runtime_error("lexicon: entry for '" + key + "' must be an array");
    std::string token = fold_case ? lower_ascii(key) : key;
    std::vector<std::string> candidates;
    for (const auto& c : value) {
      if (!c.is_string())
        throw std::runtime_error("lexicon: candidates of '" + key + "' must be strings");
      std::string cand = fold_case ? lower_ascii(c.get<std::string>())
                                   : c.get<std::string>();
      if (cand.empty() || cand == token) continue;
      if (std::find(candidates.begin(), candidates.end(), cand) == candidates.end())
        candidates.push_back(std::move(cand));
    }
    lex.add(std::move(token), std::move(candidates));
  }
  return lex;
}

void Lexicon::add(const std::string& token, std::vector<std::string> candidates) {
  candidates.erase(std::remove(candidates.begin(), candidates.end(), token),
                   candidates.end());
  entries_[token] = std::move(candidates);
}

const std::vector<std::string>* Lexicon::candidates(const std::string& token) const {
  const auto it = entries_.find(token);
  return it == entries_.end() ? nullptr : &it->second;
}

}  // namespace clucert
