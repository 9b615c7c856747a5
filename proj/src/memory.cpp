#include "odc/memory.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "odc/error.hpp"

namespace odc {

namespace {
constexpr std::string_view kSnapshotMagic = "ODCMEMS1";
}

void SamplesMemory::relabel(std::size_t idx, int c) {
  const int old = labels[idx];
  if (old == c) return;
  --counts[static_cast<std::size_t>(old)];
  ++counts[static_cast<std::size_t>(c)];
  labels[idx] = c;
}

std::vector<std::size_t> SamplesMemory::members(int c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> histogram(std::span<const int> labels, std::size_t num_clusters) {
  std::vector<std::size_t> h(num_clusters, 0);
  for (int l : labels) ++h[static_cast<std::size_t>(l)];
  return h;
}

Memories init_memories(const Matrix& all_features, std::size_t num_clusters, Rng& rng, const KmeansOptions& opts) {
  KmeansResult km = kmeans(all_features, num_clusters, rng, opts);
  Memories m;
  m.samples.features = all_features;
  m.samples.labels = std::move(km.assignments);
  m.samples.counts = histogram(m.samples.labels, num_clusters);
  m.centroids.centroids = Matrix(num_clusters, all_features.cols());
  full_recompute(m.samples, m.centroids);
  return m;
}

void momentum_update(SamplesMemory& mem, std::size_t idx, std::span<const double> fresh, const MomentumConfig& cfg) {
  auto row = mem.features.row(idx);
  if (fresh.size() != row.size()) {
    throw Error(ErrorCode::DimMismatch, "fresh feature dim does not match memory");
  }
  Vector blend;
  try {
    blend = l2_normalize(fresh);
    for (std::size_t j = 0; j < blend.size(); ++j) blend[j] = cfg.m * blend[j] + (1.0 - cfg.m) * row[j];
    l2_normalize_inplace(blend);
  } catch (const Error&) {
    ++mem.zero_norm_events;
    throw;
  }
  std::copy(blend.begin(), blend.end(), row.begin());
}

int nearest_centroid(const CentroidsMemory& cmem, std::span<const double> feature, std::span<const char> allowed) {
  int best = -1;
  double best_d = 0.0;
  for (std::size_t c = 0; c < cmem.centroids.rows(); ++c) {
    if (!allowed.empty() && !allowed[c]) continue;
    const double d = squared_euclidean(feature, cmem.centroids.row(c));
    if (best < 0 || d < best_d) {
      best = static_cast<int>(c);
      best_d = d;
    }
  }
  return best;
}

Reassignment reassign(SamplesMemory& mem, CentroidsMemory& cmem, std::size_t idx) {
  Reassignment r{mem.labels[idx], nearest_centroid(cmem, mem.features.row(idx))};
  if (r.changed()) {
    mem.relabel(idx, r.new_label);
    cmem.dirty.insert(r.old_label);
    cmem.dirty.insert(r.new_label);
  }
  return r;
}

void recompute_clusters(const SamplesMemory& mem, CentroidsMemory& cmem, std::span<const int> clusters) {
  const std::size_t k = cmem.centroids.rows();
  std::vector<char> wanted(k, 0);
  for (int c : clusters) wanted[static_cast<std::size_t>(c)] = 1;
  Matrix sums(k, cmem.centroids.cols());
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const auto c = static_cast<std::size_t>(mem.labels[i]);
    if (!wanted[c]) continue;
    auto dst = sums.row(c);
    auto src = mem.features.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!wanted[c] || mem.counts[c] == 0) continue;
    auto dst = cmem.centroids.row(c);
    auto src = sums.row(c);
    const double n = static_cast<double>(mem.counts[c]);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] / n;
  }
}

std::vector<int> recompute_dirty(const SamplesMemory& mem, CentroidsMemory& cmem) {
  std::vector<int> dirty(cmem.dirty.begin(), cmem.dirty.end());
  std::vector<int> emptied;
  for (int c : dirty) {
    if (mem.counts[static_cast<std::size_t>(c)] == 0) emptied.push_back(c);
  }
  if (!dirty.empty()) recompute_clusters(mem, cmem, dirty);
  cmem.dirty.clear();
  return emptied;
}

void full_recompute(const SamplesMemory& mem, CentroidsMemory& cmem) {
  std::vector<int> all(cmem.centroids.rows());
  for (std::size_t c = 0; c < all.size(); ++c) all[c] = static_cast<int>(c);
  recompute_clusters(mem, cmem, all);
  cmem.dirty.clear();
}

std::string check_consistency(const SamplesMemory& mem, const CentroidsMemory& cmem, double norm_tol) {
  const std::size_t n = mem.size();
  if (mem.features.rows() != n) return "feature rows != label count";
  std::size_t total = 0;
  for (std::size_t c : mem.counts) total += c;
  if (total != n) return "sum of counts " + std::to_string(total) + " != N " + std::to_string(n);
  for (int l : mem.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= mem.num_clusters()) return "label out of range";
  }
  if (histogram(mem.labels, mem.num_clusters()) != mem.counts) return "counts differ from label histogram";
  for (std::size_t i = 0; i < n; ++i) {
    const double nrm = norm2(mem.features.row(i));
    if (std::abs(nrm - 1.0) > norm_tol) return "row " + std::to_string(i) + " has norm " + std::to_string(nrm);
  }
  if (cmem.centroids.rows() != mem.num_clusters()) return "centroid count != cluster count";
  if (!all_finite(cmem.centroids.values())) return "non-finite centroid";
  for (int c : cmem.dirty) {
    if (c < 0 || static_cast<std::size_t>(c) >= mem.num_clusters()) return "dirty id out of range";
  }
  return {};
}

void save_memory_snapshot(const Memories& m, const std::filesystem::path& path) {
  detail::BinaryWriter w;
  w.magic(kSnapshotMagic);
  w.u64(m.samples.size());
  w.u64(m.samples.features.cols());
  w.u64(m.samples.num_clusters());
  for (double v : m.samples.features.values()) w.f64(v);
  for (int l : m.samples.labels) w.i32(l);
  for (double v : m.centroids.centroids.values()) w.f64(v);
  w.write_to(path);
}

Memories load_memory_snapshot(const std::filesystem::path& path) {
  detail::BinaryReader r(path, ErrorCode::CorruptCheckpoint);
  r.expect_magic(kSnapshotMagic);
  const std::uint64_t n = r.u64();
  const std::uint64_t dim = r.u64();
  const std::uint64_t k = r.u64();
  if (k == 0 || dim == 0 || r.remaining() != n * dim * 8 + n * 4 + k * dim * 8) r.fail("snapshot size mismatch");
  Memories m;
  m.samples.features = Matrix(n, dim);
  for (double& v : m.samples.features.values()) v = r.f64();
  m.samples.labels.resize(n);
  for (int& l : m.samples.labels) {
    l = r.i32();
    if (l < 0 || static_cast<std::uint64_t>(l) >= k) r.fail("label out of range");
  }
  m.samples.counts = histogram(m.samples.labels, k);
  m.centroids.centroids = Matrix(k, dim);
  for (double& v : m.centroids.centroids.values()) v = r.f64();
  r.expect_end();
  return m;
}

}  // namespace odc
