#include "odc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "odc/error.hpp"

namespace odc {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::DimMismatch, std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch, "matrix value count does not match rows*cols");
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix_finalize(seed + kGamma * (stream + 1)) ^ splitmix_finalize(stream ^ 0xD1B54A32D192ED03ULL);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return splitmix_finalize(seed_ + kGamma * counter_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_normal_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::weighted_index(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) {
    throw Error(ErrorCode::AllEmpty, "weighted_index needs a positive total weight");
  }
  const double target = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

Rng Rng::split(std::uint64_t stream) { return Rng(mix_seed(next_u64(), stream)); }

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vector l2_normalize(std::span<const double> v) {
  Vector out(v.begin(), v.end());
  l2_normalize_inplace(out);
  return out;
}

void l2_normalize_inplace(std::span<double> v) {
  // Scale by the max magnitude first so tiny or huge vectors do not under/overflow.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (!(scale > 1e-300)) {
    throw Error(ErrorCode::ZeroNorm, "cannot normalize a zero vector");
  }
  double ss = 0.0;
  for (double x : v) ss += (x / scale) * (x / scale);
  const double n = scale * std::sqrt(ss);
  if (!(n > 1e-300) || !std::isfinite(n)) {
    throw Error(ErrorCode::ZeroNorm, "cannot normalize a zero vector");
  }
  for (double& x : v) x /= n;
}

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& x : out) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : out) x /= total;
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  require_same_dim(a.cols(), b.cols());
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) s += ai[k] * bj[k];
      out(i, j) = s;
    }
  }
  return out;
}

Matrix pairwise_sq_dists(const Matrix& points, const Matrix& centers) {
  require_same_dim(points.cols(), centers.cols());
  Matrix out = matmul_transposed(points, centers);
  std::vector<double> center_sq(centers.rows());
  for (std::size_t j = 0; j < centers.rows(); ++j) center_sq[j] = dot(centers.row(j), centers.row(j));
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double point_sq = dot(points.row(i), points.row(i));
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] = std::max(0.0, point_sq + center_sq[j] - 2.0 * r[j]);
    }
  }
  return out;
}

std::size_t argmin(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace odc
