#include "odc/rebalance.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "odc/error.hpp"
#include "odc/kmeans.hpp"

namespace odc {

namespace {

Matrix gather(const Matrix& features, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), features.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = features.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

Vector class_weights(std::span<const std::size_t> counts) {
  Vector w(counts.size(), 0.0);
  double total_samples = 0.0;
  double weighted = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    const double n = static_cast<double>(counts[c]);
    w[c] = 1.0 / std::sqrt(n);
    total_samples += n;
    weighted += n * w[c];
  }
  if (total_samples == 0.0) throw Error(ErrorCode::AllEmpty, "every cluster is empty");
  const double scale = total_samples / weighted;
  for (double& x : w) x *= scale;
  return w;
}

RebalanceReport handle_small_clusters(SamplesMemory& mem, CentroidsMemory& cmem, const RebalanceConfig& cfg, Rng& rng) {
  const std::size_t k = mem.num_clusters();
  const std::size_t threshold = cfg.min_cluster_size;
  if (threshold < 1) throw Error(ErrorCode::InvalidConfig, "min_cluster_size must be >= 1");
  if (mem.size() < k * threshold) {
    throw Error(ErrorCode::Unsatisfiable, "N=" + std::to_string(mem.size()) + " < C*min_cluster_size=" +
                                              std::to_string(k * threshold) + "; lower the threshold");
  }

  RebalanceReport report;
  const int max_rounds = static_cast<int>(k);
  for (int round = 1;; ++round) {
    std::vector<int> small;
    for (std::size_t c = 0; c < k; ++c) {
      if (mem.counts[c] < threshold) small.push_back(static_cast<int>(c));
    }
    if (small.empty()) break;
    if (round > max_rounds) {
      throw Error(ErrorCode::Unsatisfiable, std::to_string(small.size()) + " small clusters remain after " +
                                                std::to_string(max_rounds) + " rounds");
    }
    report.rounds = round;
    std::stable_sort(small.begin(), small.end(),
                     [&](int a, int b) { return mem.counts[static_cast<std::size_t>(a)] < mem.counts[static_cast<std::size_t>(b)]; });

    for (int c : small) {
      const auto cu = static_cast<std::size_t>(c);
      if (mem.counts[cu] >= threshold) continue;
      std::vector<char> normal(k, 0);
      bool any_normal = false;
      for (std::size_t j = 0; j < k; ++j) {
        normal[j] = j != cu && mem.counts[j] >= threshold;
        any_normal = any_normal || normal[j];
      }
      if (!any_normal) throw Error(ErrorCode::Unsatisfiable, "no normal cluster left to absorb into");

      std::set<int> touched{c};
      for (std::size_t i : mem.members(c)) {
        const int target = nearest_centroid(cmem, mem.features.row(i), normal);
        mem.relabel(i, target);
        report.absorbed.push_back(i);
        touched.insert(target);
      }
      report.dissolved.push_back(c);

      // Split the largest cluster whose 2-means halves both reach the
      // threshold; if none does, split the largest one anyway.
      std::vector<int> by_size(k);
      for (std::size_t j = 0; j < k; ++j) by_size[j] = static_cast<int>(j);
      std::stable_sort(by_size.begin(), by_size.end(), [&](int a, int b) {
        return mem.counts[static_cast<std::size_t>(a)] > mem.counts[static_cast<std::size_t>(b)];
      });
      int largest = by_size.front();
      std::vector<std::size_t> members;
      std::vector<int> halves;
      for (int cand : by_size) {
        if (mem.counts[static_cast<std::size_t>(cand)] < 2 * threshold) break;
        std::vector<std::size_t> cand_members = mem.members(cand);
        std::vector<int> cand_halves = split_two(gather(mem.features, cand_members), rng);
        if (halves.empty()) {
          largest = cand;
          members = cand_members;
          halves = cand_halves;
        }
        const auto ones = static_cast<std::size_t>(std::count(cand_halves.begin(), cand_halves.end(), 1));
        if (ones >= threshold && cand_halves.size() - ones >= threshold) {
          largest = cand;
          members = std::move(cand_members);
          halves = std::move(cand_halves);
          break;
        }
      }
      if (halves.empty()) {
        members = mem.members(largest);
        halves = split_two(gather(mem.features, members), rng);
      }
      const int chosen = static_cast<int>(rng.below(2));
      SplitEvent ev{c, largest, {}};
      for (std::size_t r = 0; r < members.size(); ++r) {
        if (halves[r] == chosen) {
          mem.relabel(members[r], c);
          ev.moved.push_back(members[r]);
        }
      }
      touched.insert(largest);
      report.splits.push_back(std::move(ev));

      const std::vector<int> ids(touched.begin(), touched.end());
      recompute_clusters(mem, cmem, ids);
    }
  }
  return report;
}

}  // namespace odc
