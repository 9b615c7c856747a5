#include "odc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "odc/error.hpp"

namespace odc {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::LengthMismatch, std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw Error(ErrorCode::LengthMismatch, "empty label sequences");
}

double entropy(const std::map<int, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double nmi(std::span<const int> pred, std::span<const int> truth) {
  require_same_length(pred.size(), truth.size());
  const double n = static_cast<double>(pred.size());
  std::map<std::pair<int, int>, std::size_t> joint;
  std::map<int, std::size_t> pc, tc;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++joint[{pred[i], truth[i]}];
    ++pc[pred[i]];
    ++tc[truth[i]];
  }
  const double hp = entropy(pc, n);
  const double ht = entropy(tc, n);
  if (pc.size() == 1 && tc.size() == 1) return 1.0;
  if (pc.size() == 1 || tc.size() == 1) return 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = static_cast<double>(c) / n;
    const double px = static_cast<double>(pc[key.first]) / n;
    const double py = static_cast<double>(tc[key.second]) / n;
    mi += pxy * std::log(pxy / (px * py));
  }
  const double v = mi / std::sqrt(hp * ht);
  return std::clamp(v, 0.0, 1.0);
}

double purity(std::span<const int> pred, std::span<const int> truth) {
  require_same_length(pred.size(), truth.size());
  std::map<int, std::map<int, std::size_t>> table;
  for (std::size_t i = 0; i < pred.size(); ++i) ++table[pred[i]][truth[i]];
  std::size_t hit = 0;
  for (const auto& [p, row] : table) {
    std::size_t best = 0;
    for (const auto& [t, c] : row) best = std::max(best, c);
    hit += best;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double switch_ratio(std::span<const int> old_labels, std::span<const int> new_labels) {
  require_same_length(old_labels.size(), new_labels.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < old_labels.size(); ++i) changed += old_labels[i] != new_labels[i];
  return static_cast<double>(changed) / static_cast<double>(old_labels.size());
}

LossStability loss_stability(std::span<const double> curve, std::size_t epoch_len) {
  if (epoch_len == 0 || curve.size() < 2 * epoch_len || curve.size() < 2 * kStabilityWindow) {
    throw Error(ErrorCode::TooShort, "loss curve of length " + std::to_string(curve.size()) +
                                         " is too short for epoch length " + std::to_string(epoch_len));
  }
  constexpr std::size_t w = kStabilityWindow;
  // prefix[i] = sum of curve[0, i)
  std::vector<double> prefix(curve.size() + 1, 0.0);
  for (std::size_t i = 0; i < curve.size(); ++i) prefix[i + 1] = prefix[i] + curve[i];
  auto window_mean = [&](std::size_t from) { return (prefix[from + w] - prefix[from]) / static_cast<double>(w); };

  LossStability s;
  for (std::size_t i = w; i + w <= curve.size(); ++i) {
    const double jump = std::abs(window_mean(i) - window_mean(i - w));
    s.max_any_jump = std::max(s.max_any_jump, jump);
    if (i % epoch_len == 0) {
      s.max_boundary_jump = std::max(s.max_boundary_jump, jump);
      continue;
    }
    // Interior only when no epoch boundary falls strictly inside [i - w, i + w).
    const std::size_t next_boundary = (i / epoch_len + 1) * epoch_len;
    const std::size_t prev_boundary = (i / epoch_len) * epoch_len;
    if (next_boundary < i + w || (prev_boundary > i - w && prev_boundary != 0)) continue;
    s.max_interior_jump = std::max(s.max_interior_jump, jump);
  }
  return s;
}

}  // namespace odc
