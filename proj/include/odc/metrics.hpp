#pragma once

#include <cstddef>
#include <span>

namespace odc {

// Normalized mutual information, I / sqrt(H(pred) H(truth)), natural logs.
// 1 when both partitions are a single cluster, 0 when exactly one is.
double nmi(std::span<const int> pred, std::span<const int> truth);

// Fraction of samples that belong to the majority true class of their predicted cluster.
double purity(std::span<const int> pred, std::span<const int> truth);

double switch_ratio(std::span<const int> old_labels, std::span<const int> new_labels);

struct LossStability {
  double max_boundary_jump = 0.0;  // across epoch boundaries
  double max_interior_jump = 0.0;  // positions whose windows stay inside one epoch
  double max_any_jump = 0.0;       // every position, boundaries included
};

constexpr std::size_t kStabilityWindow = 5;

// The jump at position i is |mean(curve[i, i+5)) - mean(curve[i-5, i))|, the
// difference between the 5-iteration averages after and before i. Only
// positions with both windows complete are considered.
LossStability loss_stability(std::span<const double> curve, std::size_t epoch_len);

}  // namespace odc
