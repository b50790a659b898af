#pragma once

#include <map>
#include <optional>
#include <vector>

#include "clucert/embedding.hpp"
#include "clucert/perturb.hpp"

namespace clucert {

struct ClusterParams {
  double eps = 0.15;   // cosine-distance radius
  int min_samples = 5;
};

struct ClusterAssignment {
  static constexpr int kNoise = -1;
  std::vector<int> labels;             // cluster id per point, kNoise for noise
  std::map<int, int> cluster_sizes;    // id -> size (noise excluded)
  std::optional<int> largest_cluster;  // maximal size, ties to the lower id
};

// DBSCAN under cosine distance. Core points have >= min_samples neighbors
// within eps (self-inclusive). Deterministic given input order: seeds are
// visited in index order and contested border points go to the lower cluster
// id.
ClusterAssignment dbscan(const std::vector<EmbeddingVector>& points,
                         const ClusterParams& params);

struct FilterResult {
  std::vector<PerturbedSample> retained;  // input order preserved
  std::vector<int> retained_indices;
  // false when the all-noise fallback returned the full input unfiltered
  bool cluster_filtered = false;
};

// Keeps exactly the samples in the largest cluster. When everything is noise,
// falls back to the full input so certification degrades to plain smoothing.
FilterResult filter_largest(const std::vector<PerturbedSample>& samples,
                            const ClusterAssignment& assignment);

}  // namespace clucert
