#pragma once

#include <cstddef>
#include <vector>

#include "odc/numerics.hpp"

namespace odc {

struct KmeansResult {
  std::vector<int> assignments;
  Matrix centroids;  // K x dim, exact means of the assignments
  double objective = 0.0;
  int iterations_run = 0;
  bool converged = false;  // stopped at an assignment fixpoint
  std::vector<double> objective_trace;  // one entry per iteration, non-increasing
};

struct KmeansOptions {
  int restarts = 10;
  int max_iters = 100;
  double tol = 1e-6;
};

// D^2-weighted seeding. Returns K rows taken from distinct point indices.
Matrix kmeans_pp_seed(const Matrix& points, std::size_t k, Rng& rng);

KmeansResult lloyd(const Matrix& points, const Matrix& init_centroids, int max_iters, double tol);

// Assigns each row to its nearest center; ties go to the lowest index.
std::vector<int> nearest_assignments(const Matrix& points, const Matrix& centers);

// Gives every empty cluster the point farthest from its current centroid
// (taken only from clusters that keep at least one member) and moves that
// point into it. No-op when no cluster is empty.
void repair_empty(const Matrix& points, std::vector<int>& assignments, Matrix& centroids);

// Best-objective result over `restarts` k-means++ seeded runs.
KmeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, const KmeansOptions& opts = {});

// 2-means split with both sides nonempty. Labels are 0/1 per row.
std::vector<int> split_two(const Matrix& points, Rng& rng);

Matrix cluster_means(const Matrix& points, const std::vector<int>& assignments, std::size_t k);
double kmeans_objective(const Matrix& points, const std::vector<int>& assignments, const Matrix& centroids);

}  // namespace odc
