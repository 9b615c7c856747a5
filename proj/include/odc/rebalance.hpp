#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "odc/memory.hpp"
#include "odc/numerics.hpp"

namespace odc {

struct RebalanceConfig {
  std::size_t min_cluster_size = 20;
  // Iterations between small-cluster checks; 0 means "with every centroid refresh".
  int check_every = 0;
};

struct SplitEvent {
  int refilled;  // the emptied small cluster that receives one half
  int source;    // the largest cluster that was split
  std::vector<std::size_t> moved;
};

struct RebalanceReport {
  int rounds = 0;
  std::vector<int> dissolved;            // small clusters, in processing order
  std::vector<std::size_t> absorbed;     // samples moved out of small clusters
  std::vector<SplitEvent> splits;

  bool empty() const { return dissolved.empty(); }
};

// w_c = s / sqrt(N_c) (0 for empty clusters), with s chosen so that
// sum_c w_c * N_c == N.
Vector class_weights(std::span<const std::size_t> counts);

// Dissolves every cluster smaller than min_cluster_size into its nearest
// normal neighbours and refills it with a random half of a 2-means split of
// the largest cluster (the largest one whose halves both reach the threshold,
// when there is one), until all clusters are normal. Touched centroids are
// recomputed.
RebalanceReport handle_small_clusters(SamplesMemory& mem, CentroidsMemory& cmem, const RebalanceConfig& cfg, Rng& rng);

}  // namespace odc
