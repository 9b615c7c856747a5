// Oracles shared by the unit tests and the acceptance binary.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "odc/backbone.hpp"
#include "odc/kmeans.hpp"
#include "odc/memory.hpp"
#include "odc/numerics.hpp"

namespace odc::testing {

// Random net with nonzero biases, so every gradient path is exercised.
inline Backbone random_net(const BackboneDims& dims, Rng& rng) {
  Backbone b = Backbone::random(dims, rng);
  for (auto* layer : {&b.params.extractor, &b.params.head_in, &b.params.head_out, &b.params.classifier}) {
    for (double& v : layer->bias) v = rng.uniform(-0.5, 0.5);
  }
  return b;
}

inline double net_loss(const Backbone& b, const Matrix& x, const std::vector<int>& labels,
                       const std::vector<double>& weights) {
  return weighted_ce_loss(forward(b, x).logits, labels, weights).loss;
}

// Max over every parameter of |analytic - central difference| / max(|a|, |n|, floor).
inline double max_gradient_rel_error(const Backbone& b, const Matrix& x, const std::vector<int>& labels,
                                     const std::vector<double>& weights, double h = 1e-5, double floor = 1e-7) {
  const ForwardCache cache = forward(b, x);
  const LossResult lr = weighted_ce_loss(cache.logits, labels, weights);
  const BackwardResult br = backward(b, cache, lr.dlogits);
  const auto analytic = br.grads.tensors();

  Backbone probe = b;
  auto params = probe.params.tensors();
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + h;
      const double up = net_loss(probe, x, labels, weights);
      params[t][i] = saved - h;
      const double down = net_loss(probe, x, labels, weights);
      params[t][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

struct BruteForce2 {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<int> labels;
};

// Minimum 2-means objective over every partition into two nonempty sides.
inline BruteForce2 best_two_partition(const Matrix& pts) {
  const std::size_t n = pts.rows();
  BruteForce2 best;
  // Fix point 0 on side 0 so each partition is visited once.
  for (std::size_t mask = 0; mask < (std::size_t{1} << (n - 1)); ++mask) {
    std::vector<int> labels(n, 0);
    bool has_one = false;
    for (std::size_t i = 1; i < n; ++i) {
      labels[i] = static_cast<int>((mask >> (i - 1)) & 1U);
      has_one = has_one || labels[i] == 1;
    }
    if (!has_one) continue;
    const Matrix means = cluster_means(pts, labels, 2);
    const double obj = kmeans_objective(pts, labels, means);
    if (obj < best.objective) best = {obj, labels};
  }
  return best;
}

// Mean of member rows computed from scratch, in row order.
inline Vector oracle_mean(const SamplesMemory& mem, int c) {
  Vector mean(mem.features.cols(), 0.0);
  std::size_t count = 0;
  for (std::size_t n = 0; n < mem.size(); ++n) {
    if (mem.labels[n] != c) continue;
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += mem.features(n, d);
    ++count;
  }
  for (double& v : mean) v /= static_cast<double>(count);
  return mean;
}

// Entropy-based NMI straight from the contingency table.
inline double oracle_nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    pab[{a[i], b[i]}] += 1.0;
  }
  auto entropy = [n](const auto& m) {
    double h = 0.0;
    for (const auto& [k, c] : m) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(pa), hb = entropy(pb);
  double mi = 0.0;
  for (const auto& [k, c] : pab) mi += (c / n) * std::log((c / n) / ((pa[k.first] / n) * (pb[k.second] / n)));
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  return mi / std::sqrt(ha * hb);
}

inline double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace odc::testing
