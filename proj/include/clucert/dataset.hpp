#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clucert/model_client.hpp"

namespace clucert {

struct DatasetRecord {
  std::string id;
  std::string text;
  std::string label;
};

// JSONL records {"id","text","label"}. Labels are validated against the task
// (exact match for closed label sets, canonical numeric for math); text must
// be non-empty and free of the reserved [MASK] literal. Malformed lines are
// hard errors that name the line.
std::vector<DatasetRecord> load_dataset(const std::string& path, const TaskSpec& task);

// Deterministic subsample without replacement; original order is preserved.
std::vector<DatasetRecord> sample_records(std::vector<DatasetRecord> records, long n,
                                          uint64_t seed);

}  // namespace clucert
