#include "odc/kmeans.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "odc/error.hpp"

namespace odc {

Matrix kmeans_pp_seed(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  if (k < 1 || n < k) {
    throw Error(ErrorCode::TooFewPoints, "need at least K=" + std::to_string(k) + " points, have " + std::to_string(n));
  }
  Matrix seeds(k, points.cols());
  std::vector<char> chosen(n, 0);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t slot, std::size_t idx) {
    chosen[idx] = 1;
    auto src = points.row(idx);
    std::copy(src.begin(), src.end(), seeds.row(slot).begin());
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = chosen[i] ? 0.0 : std::min(min_d[i], squared_euclidean(points.row(i), src));
    }
  };

  take(0, static_cast<std::size_t>(rng.below(n)));
  for (std::size_t s = 1; s < k; ++s) {
    double total = 0.0;
    for (double d : min_d) total += d;
    std::size_t idx;
    if (total > 0.0) {
      idx = rng.weighted_index(min_d);
    } else {
      // Every remaining point coincides with a seed; fall back to uniform over unchosen indices.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      idx = free[static_cast<std::size_t>(rng.below(free.size()))];
    }
    take(s, idx);
  }
  return seeds;
}

std::vector<int> nearest_assignments(const Matrix& points, const Matrix& centers) {
  const Matrix d = pairwise_sq_dists(points, centers);
  std::vector<int> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) out[i] = static_cast<int>(argmin(d.row(i)));
  return out;
}

Matrix cluster_means(const Matrix& points, const std::vector<int>& assignments, std::size_t k) {
  Matrix means(k, points.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto c = static_cast<std::size_t>(assignments[i]);
    ++counts[c];
    auto dst = means.row(c);
    auto src = points.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
  }
  return means;
}

double kmeans_objective(const Matrix& points, const std::vector<int>& assignments, const Matrix& centroids) {
  double obj = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    obj += squared_euclidean(points.row(i), centroids.row(static_cast<std::size_t>(assignments[i])));
  }
  return obj;
}

void repair_empty(const Matrix& points, std::vector<int>& assignments, Matrix& centroids) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  for (int a : assignments) ++counts[static_cast<std::size_t>(a)];
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t best = points.rows();
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      const auto owner = static_cast<std::size_t>(assignments[i]);
      if (counts[owner] < 2) continue;
      const double d = squared_euclidean(points.row(i), centroids.row(owner));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best == points.rows()) {
      throw Error(ErrorCode::TooFewPoints, "cannot refill an empty cluster: fewer points than clusters");
    }
    --counts[static_cast<std::size_t>(assignments[best])];
    assignments[best] = static_cast<int>(c);
    ++counts[c];
    auto src = points.row(best);
    std::copy(src.begin(), src.end(), centroids.row(c).begin());
  }
}

KmeansResult lloyd(const Matrix& points, const Matrix& init_centroids, int max_iters, double tol) {
  if (points.cols() != init_centroids.cols()) {
    throw Error(ErrorCode::DimMismatch, "points and centroids differ in dimension");
  }
  if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  const std::size_t k = init_centroids.rows();
  if (points.rows() < k) {
    throw Error(ErrorCode::TooFewPoints, "fewer points than centroids");
  }

  KmeansResult r;
  Matrix centroids = init_centroids;
  std::vector<int> prev;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iters; ++it) {
    std::vector<int> assign = nearest_assignments(points, centroids);
    repair_empty(points, assign, centroids);
    const double obj = kmeans_objective(points, assign, centroids);
    assert(obj <= prev_obj * (1.0 + 1e-12) + 1e-12);
    r.objective_trace.push_back(obj);
    r.iterations_run = it;
    centroids = cluster_means(points, assign, k);
    const bool unchanged = assign == prev;
    prev = std::move(assign);
    if (unchanged) {
      r.converged = true;
      break;
    }
    if (std::isfinite(prev_obj) && (prev_obj - obj) <= tol * prev_obj) break;
    prev_obj = obj;
  }
  r.assignments = std::move(prev);
  r.centroids = std::move(centroids);
  r.objective = kmeans_objective(points, r.assignments, r.centroids);
  return r;
}

KmeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, const KmeansOptions& opts) {
  if (opts.restarts < 1) throw Error(ErrorCode::InvalidConfig, "restarts must be >= 1");
  KmeansResult best;
  bool have = false;
  for (int r = 0; r < opts.restarts; ++r) {
    Matrix seeds = kmeans_pp_seed(points, k, rng);
    KmeansResult cur = lloyd(points, seeds, opts.max_iters, opts.tol);
    if (!have || cur.objective < best.objective) {
      best = std::move(cur);
      have = true;
    }
  }
  return best;
}

std::vector<int> split_two(const Matrix& points, Rng& rng) {
  if (points.rows() < 2) {
    throw Error(ErrorCode::TooFewPoints, "split_two needs at least 2 rows");
  }
  KmeansOptions opts;
  opts.restarts = 3;
  return kmeans(points, 2, rng, opts).assignments;
}

}  // namespace odc
