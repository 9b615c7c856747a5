#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "odc/numerics.hpp"

namespace odc {

struct BlobSpec {
  std::size_t num_classes = 5;
  std::size_t dim = 16;
  std::size_t num_samples = 2000;
  double separation = 6.0;  // minimum distance between class means, in noise std units
  double longtail_ratio = 1.0;  // largest class size / smallest class size
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix points;
  std::vector<int> labels;  // ground truth; only meaningful when has_labels
  bool has_labels = false;
  Matrix class_means;       // set by gen_blobs only

  std::size_t size() const { return points.rows(); }
  std::size_t num_true_classes() const;
};

// Class sizes proportional to R^(-i/(K-1)), rounded by largest remainder so
// they sum to n exactly. Every class keeps at least one sample.
std::vector<std::size_t> longtail_sizes(std::size_t num_classes, std::size_t n, double ratio);

Dataset gen_blobs(const BlobSpec& spec);

// Comma-separated with a header row "x0,...,x{d-1}[,label]".
void write_csv(const Dataset& d, const std::filesystem::path& path);

// Header is detected when the first row has a non-numeric field; a final
// header column named "label" holds integer ground truth. Errors report
// 1-based line and column numbers.
Dataset load_csv(const std::filesystem::path& path);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace odc
