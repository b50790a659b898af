#include "clucert/clustering.hpp"

#include <deque>
#include <stdexcept>

namespace clucert {

ClusterAssignment dbscan(const std::vector<EmbeddingVector>& points,
                         const ClusterParams& params) {
  if (points.empty()) throw std::invalid_argument("dbscan: empty point list");
  if (params.eps < 0.0) throw std::invalid_argument("dbscan: eps must be >= 0");
  if (params.min_samples < 1)
    throw std::invalid_argument("dbscan: min_samples must be >= 1");
  const size_t n = points.size();
  for (const auto& p : points)
    if (p.size() != points[0].size())
      throw std::invalid_argument("dbscan: dimension mismatch");

  std::vector<std::vector<int>> neighbors(n);
  for (size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(static_cast<int>(i));  // self-inclusive
    for (size_t j = i + 1; j < n; ++j) {
      if (cosine_distance(points[i], points[j]) <= params.eps) {
        neighbors[i].push_back(static_cast<int>(j));
        neighbors[j].push_back(static_cast<int>(i));
      }
    }
  }
  std::vector<bool> core(n);
  for (size_t i = 0; i < n; ++i)
    core[i] = static_cast<int>(neighbors[i].size()) >= params.min_samples;

  ClusterAssignment out;
  out.labels.assign(n, ClusterAssignment::kNoise);
  int next_id = 0;
  for (size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || out.labels[seed] != ClusterAssignment::kNoise) continue;
    const int id = next_id++;
    std::deque<int> queue{static_cast<int>(seed)};
    out.labels[seed] = id;
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      if (!core[static_cast<size_t>(p)]) continue;  // border points do not expand
      for (int q : neighbors[static_cast<size_t>(p)]) {
        if (out.labels[static_cast<size_t>(q)] != ClusterAssignment::kNoise) continue;
        out.labels[static_cast<size_t>(q)] = id;
        queue.push_back(q);
      }
    }
  }
  for (int label : out.labels)
    if (label != ClusterAssignment::kNoise) out.cluster_sizes[label]++;
  int best_size = 0;
  for (const auto& [id, size] : out.cluster_sizes) {
    if (size > best_size) {  // map iteration is id-ascending, so ties keep the lower id
      best_size = size;
      out.largest_cluster = id;
    }
  }
  return out;
}

FilterResult filter_largest(const std::vector<PerturbedSample>& samples,
                            const ClusterAssignment& assignment) {
  if (samples.size() != assignment.labels.size())
    throw std::invalid_argument("filter_largest: assignment misaligned with samples");
  FilterResult out;
  if (!assignment.largest_cluster.has_value()) {
    out.retained = samples;
    out.retained_indices.resize(samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
      out.retained_indices[i] = static_cast<int>(i);
    out.cluster_filtered = false;
    return out;
  }
  const int keep = *assignment.largest_cluster;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (assignment.labels[i] == keep) {
      out.retained.push_back(samples[i]);
      out.retained_indices.push_back(static_cast<int>(i));
    }
  }
  out.cluster_filtered = true;
  return out;
}

}  // namespace clucert
