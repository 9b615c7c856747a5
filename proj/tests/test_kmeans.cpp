#include <algorithm>
#include <set>

#include "doctest.h"
#include "odc/error.hpp"
#include "odc/kmeans.hpp"
#include "support.hpp"

using namespace odc;

namespace {

Matrix random_points(std::size_t n, std::size_t d, Rng& rng) {
  Matrix m(n, d);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("kmeans") {

TEST_CASE("kmeans++ seeding picks distinct rows") {
  Rng rng(1);
  const Matrix pts = random_points(6, 2, rng);
  const Matrix all = kmeans_pp_seed(pts, 6, rng);
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < 6; ++i) seen.insert(std::vector<double>(all.row(i).begin(), all.row(i).end()));
  std::set<std::vector<double>> expected;
  for (std::size_t i = 0; i < 6; ++i) expected.insert(std::vector<double>(pts.row(i).begin(), pts.row(i).end()));
  CHECK(seen == expected);

  const Matrix one = kmeans_pp_seed(pts, 1, rng);
  CHECK(one.rows() == 1);
  bool is_row = false;
  for (std::size_t i = 0; i < 6; ++i) is_row = is_row || std::equal(one.row(0).begin(), one.row(0).end(), pts.row(i).begin());
  CHECK(is_row);

  CHECK_THROWS_AS(kmeans_pp_seed(pts, 7, rng), Error);

  // Duplicated points still yield distinct indices.
  const Matrix dup(4, 1, {1.0, 1.0, 1.0, 1.0});
  CHECK(kmeans_pp_seed(dup, 4, rng).rows() == 4);
}

TEST_CASE("kmeans++ seeds land in different far pairs") {
  // Pairs {0, 0.1} and {100, 100.1}: after a first seed in one pair, the
  // probability of the second seed in the same pair is below 1e-5.
  const Matrix pts(4, 1, {0.0, 0.1, 100.0, 100.1});
  int split = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    Rng rng(s);
    const Matrix seeds = kmeans_pp_seed(pts, 2, rng);
    split += (seeds(0, 0) < 50) != (seeds(1, 0) < 50);
  }
  CHECK(split >= 495);
}

TEST_CASE("lloyd basic cases") {
  const Matrix pts(2, 1, {0.0, 10.0});
  const KmeansResult r = lloyd(pts, Matrix(2, 1, {1.0, 9.0}), 100, 1e-6);
  CHECK(r.centroids == Matrix(2, 1, {0.0, 10.0}));
  CHECK(r.objective == 0.0);
  CHECK(r.assignments == std::vector<int>{0, 1});

  const Matrix same(5, 2, 3.0);
  const KmeansResult s = lloyd(same, Matrix(2, 2, {3.0, 3.0, 3.0, 3.0}), 100, 1e-6);
  CHECK(s.objective == 0.0);
  CHECK(s.objective_trace.front() == 0.0);

  CHECK_THROWS_AS(lloyd(pts, Matrix(2, 2), 10, 1e-6), Error);
}

TEST_CASE("lloyd returns a fixpoint with a non-increasing objective") {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const Matrix pts = random_points(40, 3, rng);
    const KmeansResult r = lloyd(pts, kmeans_pp_seed(pts, 4, rng), 100, 0.0);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
    if (r.converged) CHECK(nearest_assignments(pts, r.centroids) == r.assignments);
    CHECK(r.objective == doctest::Approx(kmeans_objective(pts, r.assignments, r.centroids)).epsilon(1e-12));
    CHECK(r.centroids == cluster_means(pts, r.assignments, 4));
  }
}

TEST_CASE("restarted kmeans matches the exhaustive 2-partition optimum") {
  Rng rng(5);
  int hits = 0;
  const int trials = 10;
  for (int t = 0; t < trials; ++t) {
    const Matrix pts = random_points(6, 2, rng);
    const double best = testing::best_two_partition(pts).objective;
    const KmeansResult r = kmeans(pts, 2, rng);
    CHECK(r.objective >= best - 1e-9);
    hits += std::abs(r.objective - best) <= 1e-9;
  }
  CHECK(hits >= 9);
}

TEST_CASE("kmeans is deterministic per seed") {
  Rng data(9);
  const Matrix pts = random_points(50, 4, data);
  Rng a(77), b(77);
  const KmeansResult ra = kmeans(pts, 5, a);
  const KmeansResult rb = kmeans(pts, 5, b);
  CHECK(ra.assignments == rb.assignments);
  CHECK(ra.centroids == rb.centroids);
  CHECK(ra.objective == rb.objective);
}

TEST_CASE("repair_empty") {
  const Matrix pts(4, 1, {0.0, 0.1, 0.2, 50.0});
  std::vector<int> asg{0, 0, 0, 0};
  Matrix ctr(2, 1, {12.575, -3.0});
  const std::vector<int> before = asg;

  std::vector<int> full{0, 0, 1, 1};
  Matrix full_ctr = cluster_means(pts, full, 2);
  const Matrix full_before = full_ctr;
  repair_empty(pts, full, full_ctr);
  CHECK(full == std::vector<int>{0, 0, 1, 1});
  CHECK(full_ctr == full_before);

  repair_empty(pts, asg, ctr);
  CHECK(asg == std::vector<int>{0, 0, 0, 1});
  CHECK(ctr(1, 0) == 50.0);
  for (int c = 0; c < 2; ++c) CHECK(std::count(asg.begin(), asg.end(), c) > 0);
}

TEST_CASE("repair leaves no cluster empty from a bad start") {
  Rng rng(2);
  const Matrix pts = random_points(20, 2, rng);
  // Every seed far away from the data except the first.
  Matrix init(5, 2, 1000.0);
  init(0, 0) = 0.0;
  init(0, 1) = 0.0;
  const KmeansResult r = lloyd(pts, init, 50, 1e-6);
  for (int c = 0; c < 5; ++c) CHECK(std::count(r.assignments.begin(), r.assignments.end(), c) > 0);
}

TEST_CASE("split_two") {
  Rng rng(4);
  const std::vector<int> two = split_two(Matrix(2, 1, {0.0, 1.0}), rng);
  CHECK(two[0] != two[1]);

  Matrix blobs(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    blobs(i, 0) = (i < 5 ? 0.0 : 20.0) + 0.1 * rng.normal();
    blobs(i, 1) = 0.1 * rng.normal();
  }
  const std::vector<int> s = split_two(blobs, rng);
  const std::vector<int> oracle = testing::best_two_partition(blobs).labels;
  CHECK(testing::oracle_nmi(s, oracle) == 1.0);
  for (std::size_t i = 1; i < 5; ++i) CHECK(s[i] == s[0]);
  for (std::size_t i = 6; i < 10; ++i) CHECK(s[i] == s[5]);
  CHECK(s[0] != s[5]);

  const std::vector<int> same = split_two(Matrix(6, 3, 1.5), rng);
  CHECK(std::count(same.begin(), same.end(), 0) > 0);
  CHECK(std::count(same.begin(), same.end(), 1) > 0);

  CHECK_THROWS_AS(split_two(Matrix(1, 2), rng), Error);
}

}
