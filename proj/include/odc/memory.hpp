#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "odc/kmeans.hpp"
#include "odc/numerics.hpp"

namespace odc {

// Per-sample momentum features (unit-norm rows) and pseudo-labels.
struct SamplesMemory {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> counts;  // counts[c] == #{n : labels[n] == c}
  std::size_t zero_norm_events = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t num_clusters() const { return counts.size(); }

  // Moves sample idx to cluster c, keeping counts in sync.
  void relabel(std::size_t idx, int c);
  std::vector<std::size_t> members(int c) const;
};

// Per-cluster mean features. `dirty` holds clusters whose membership changed
// since their mean was last recomputed.
struct CentroidsMemory {
  Matrix centroids;
  std::set<int> dirty;
};

struct MomentumConfig {
  double m = 0.5;
};

struct Memories {
  SamplesMemory samples;
  CentroidsMemory centroids;
};

// all_features rows must already be L2-normalized.
Memories init_memories(const Matrix& all_features, std::size_t num_clusters, Rng& rng, const KmeansOptions& opts = {});

// Row idx <- normalize(m * normalize(fresh) + (1 - m) * row). On a degenerate
// fresh feature or blend, the row is left unchanged, the event is counted and
// ZeroNorm is thrown.
void momentum_update(SamplesMemory& mem, std::size_t idx, std::span<const double> fresh, const MomentumConfig& cfg);

// Nearest centroid by squared Euclidean distance; ties go to the lowest id.
// With `allowed` non-empty, only clusters with allowed[c] != 0 are candidates.
int nearest_centroid(const CentroidsMemory& cmem, std::span<const double> feature, std::span<const char> allowed = {});

struct Reassignment {
  int old_label;
  int new_label;
  bool changed() const { return old_label != new_label; }
};

Reassignment reassign(SamplesMemory& mem, CentroidsMemory& cmem, std::size_t idx);

// Recomputes the mean of every dirty cluster with members and clears the dirty
// set. Returns the dirty clusters that had no members; their centroids are left stale.
std::vector<int> recompute_dirty(const SamplesMemory& mem, CentroidsMemory& cmem);

// Recomputes the given clusters' means (clusters without members are skipped).
void recompute_clusters(const SamplesMemory& mem, CentroidsMemory& cmem, std::span<const int> clusters);

void full_recompute(const SamplesMemory& mem, CentroidsMemory& cmem);

// Empty string when every memory invariant holds, otherwise a description of
// the first violation.
std::string check_consistency(const SamplesMemory& mem, const CentroidsMemory& cmem, double norm_tol = 1e-9);

std::vector<std::size_t> histogram(std::span<const int> labels, std::size_t num_clusters);

// Little-endian snapshot: magic, N, dim, C, features, labels (i32), centroids.
void save_memory_snapshot(const Memories& m, const std::filesystem::path& path);
Memories load_memory_snapshot(const std::filesystem::path& path);

}  // namespace odc
