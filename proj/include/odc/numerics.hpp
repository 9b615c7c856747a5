#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace odc {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Counter-based generator (SplitMix64). All distributions are implemented
// here rather than through <random> so that streams are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), counter_(0) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Index drawn with probability proportional to weights[i]. Requires a
  // positive total weight.
  std::size_t weighted_index(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Independent generator for a sub-task, keyed by `stream`. Advances this
  // generator by one draw.
  Rng split(std::uint64_t stream);

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
Vector l2_normalize(std::span<const double> v);
// Normalizes in place; throws ZeroNorm and leaves v untouched on degenerate input.
void l2_normalize_inplace(std::span<double> v);
double squared_euclidean(std::span<const double> a, std::span<const double> b);
Vector softmax(std::span<const double> logits);
Matrix pairwise_sq_dists(const Matrix& points, const Matrix& centers);

// Index of the smallest entry; ties resolve to the lowest index.
std::size_t argmin(std::span<const double> values);

bool all_finite(std::span<const double> values);

// out = a * b^T (a: n x k, b: m x k).
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

}  // namespace odc
