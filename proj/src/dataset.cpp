#include "clucert/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "clucert/rng.hpp"
#include "clucert/text.hpp"

namespace clucert {
namespace {

std::string field_as_string(const nlohmann::json& j, const char* name, size_t lineno) {
  if (!j.contains(name))
    throw std::runtime_error("dataset line " + std::to_string(lineno) +
                             ": missing field '" + name + "'");
  const auto& v = j.at(name);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return std::to_string(v.get<double>());
  throw std::runtime_error("dataset line " + std::to_string(lineno) + ": field '" +
                           name + "' must be a string or number");
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path, const TaskSpec& task) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);

  std::vector<DatasetRecord> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) +
                               ": invalid JSON: " + e.what());
    }
    DatasetRecord rec;
    rec.id = field_as_string(j, "id", lineno);
    rec.text = field_as_string(j, "text", lineno);
    rec.label = field_as_string(j, "label", lineno);

    if (rec.text.empty())
      throw std::runtime_error("dataset line " + std::to_string(lineno) + " (id " +
                               rec.id + "): empty text");
    if (rec.text.find(kMaskToken) != std::string::npos)
      throw std::runtime_error("dataset line " + std::to_string(lineno) + " (id " +
                               rec.id + "): text contains the reserved [MASK] literal");
    if (task.closed()) {
      if (std::find(task.label_set.begin(), task.label_set.end(), rec.label) ==
          task.label_set.end())
        throw std::runtime_error("dataset line " + std::to_string(lineno) + " (id " +
                                 rec.id + "): unknown label '" + rec.label + "'");
    } else {
      const std::string canon = canonical_numeric(rec.label);
      if (canon.empty())
        throw std::runtime_error("dataset line " + std::to_string(lineno) + " (id " +
                                 rec.id + "): label '" + rec.label +
                                 "' is not numeric");
      rec.label = canon;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<DatasetRecord> sample_records(std::vector<DatasetRecord> records, long n,
                                          uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample_records: negative sample size");
  if (static_cast<size_t>(n) >= records.size()) return records;
  std::vector<size_t> order(records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(static_cast<size_t>(n));
  std::sort(order.begin(), order.end());
  std::vector<DatasetRecord> out;
  out.reserve(order.size());
  for (size_t idx : order) out.push_back(std::move(records[idx]));
  return out;
}

}  // namespace clucert
