#include "odc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>

#include "odc/error.hpp"

namespace odc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, std::size_t col, const std::string& why) {
  throw Error(ErrorCode::ParseError, path.string() + ": row " + std::to_string(line) + ", column " +
                                         std::to_string(col) + ": " + why);
}

}  // namespace

std::size_t Dataset::num_true_classes() const {
  if (!has_labels) return 0;
  return std::set<int>(labels.begin(), labels.end()).size();
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::size_t> longtail_sizes(std::size_t num_classes, std::size_t n, double ratio) {
  if (num_classes == 0 || n < num_classes) {
    throw Error(ErrorCode::InvalidConfig, "need at least one sample per class");
  }
  if (!(ratio >= 1.0)) throw Error(ErrorCode::InvalidConfig, "long-tail ratio must be >= 1");
  std::vector<double> raw(num_classes, 1.0);
  if (num_classes > 1) {
    for (std::size_t i = 0; i < num_classes; ++i) {
      raw[i] = std::pow(ratio, -static_cast<double>(i) / static_cast<double>(num_classes - 1));
    }
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  std::vector<std::size_t> sizes(num_classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < num_classes; ++i) {
    const double quota = static_cast<double>(n) * raw[i] / total;
    sizes[i] = static_cast<std::size_t>(std::floor(quota));
    assigned += sizes[i];
    remainders.emplace_back(quota - std::floor(quota), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++sizes[remainders[r % num_classes].second];
  for (std::size_t i = 0; i < num_classes; ++i) {
    while (sizes[i] == 0) {
      const auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      --sizes[largest];
      ++sizes[i];
    }
  }
  return sizes;
}

Dataset gen_blobs(const BlobSpec& spec) {
  if (spec.dim == 0) throw Error(ErrorCode::InvalidConfig, "dim must be positive");
  if (!(spec.separation >= 0.0)) throw Error(ErrorCode::InvalidConfig, "separation must be nonnegative");
  const std::vector<std::size_t> sizes = longtail_sizes(spec.num_classes, spec.num_samples, spec.longtail_ratio);
  Rng rng(spec.seed);

  // Means drawn from an isotropic Gaussian scaled so that typical pairwise
  // distances are 1.5x the separation; rejected until the minimum holds.
  Dataset d;
  d.class_means = Matrix(spec.num_classes, spec.dim);
  double scale = 1.5 * spec.separation / std::sqrt(2.0 * static_cast<double>(spec.dim));
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 0 && attempt % 100 == 0) scale *= 1.1;
      auto mean = d.class_means.row(c);
      for (double& v : mean) v = scale * rng.normal();
      bool ok = true;
      for (std::size_t p = 0; p < c && ok; ++p) {
        ok = squared_euclidean(mean, d.class_means.row(p)) >= spec.separation * spec.separation;
      }
      if (ok) break;
    }
  }

  std::vector<int> labels;
  labels.reserve(spec.num_samples);
  for (std::size_t c = 0; c < spec.num_classes; ++c) labels.insert(labels.end(), sizes[c], static_cast<int>(c));
  rng.shuffle(labels);

  d.points = Matrix(spec.num_samples, spec.dim);
  for (std::size_t i = 0; i < spec.num_samples; ++i) {
    auto mean = d.class_means.row(static_cast<std::size_t>(labels[i]));
    auto row = d.points.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) row[j] = mean[j] + rng.normal();
  }
  d.labels = std::move(labels);
  d.has_labels = true;
  return d;
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  const std::size_t cols = d.points.cols();
  for (std::size_t j = 0; j < cols; ++j) out << (j ? "," : "") << 'x' << j;
  if (d.has_labels) out << (cols ? "," : "") << "label";
  out << '\n';
  const std::size_t rows = d.has_labels ? d.labels.size() : d.points.rows();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out << (j ? "," : "") << format_double(d.points(i, j));
    if (d.has_labels) out << (cols ? "," : "") << d.labels[i];
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  Dataset d;
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t feature_cols = 0;
  std::size_t rows = 0;
  bool first = true;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (first) {
      first = false;
      width = fields.size();
      double probe = 0.0;
      const bool header = std::any_of(fields.begin(), fields.end(), [&](std::string_view f) { return !parse_double(f, probe); });
      if (header) {
        d.has_labels = fields.back() == "label";
        feature_cols = d.has_labels ? width - 1 : width;
        continue;
      }
      feature_cols = width;
    }
    if (fields.size() != width) {
      parse_fail(path, line_no, std::min(fields.size(), width) + 1,
                 "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < feature_cols; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j], v)) parse_fail(path, line_no, j + 1, "malformed number '" + std::string(fields[j]) + "'");
      values.push_back(v);
    }
    if (d.has_labels) {
      int label = 0;
      if (!parse_int(fields[width - 1], label) || label < 0) {
        parse_fail(path, line_no, width, "label must be a nonnegative integer");
      }
      d.labels.push_back(label);
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::ParseError, path.string() + ": no data rows");
  d.points = Matrix(rows, feature_cols, std::move(values));
  return d;
}

}  // namespace odc
