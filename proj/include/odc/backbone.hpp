#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "odc/numerics.hpp"

namespace odc {

struct Affine {
  Matrix weight;  // out x in
  Vector bias;    // out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  friend bool operator==(const Affine&, const Affine&) = default;
};

struct BackboneDims {
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t feature_dim = 16;
  std::size_t num_classes = 50;

  friend bool operator==(const BackboneDims&, const BackboneDims&) = default;
};

// Parameter set of the network. Gradients and SGD velocity share the layout.
//
//   extractor: input -> hidden, affine + relu
//   head:      hidden -> feature, affine + relu + affine
//   classifier: feature -> num_classes, affine
struct BackboneParams {
  Affine extractor;
  Affine head_in;
  Affine head_out;
  Affine classifier;

  static BackboneParams zeros(const BackboneDims& dims);

  // Every tensor in a fixed order: weights then bias for each layer, input to output.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  friend bool operator==(const BackboneParams&, const BackboneParams&) = default;
};

using Gradients = BackboneParams;

struct Backbone {
  BackboneDims dims;
  BackboneParams params;

  // Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static Backbone random(const BackboneDims& dims, Rng& rng);
  static Backbone zeros(const BackboneDims& dims);

  friend bool operator==(const Backbone&, const Backbone&) = default;
};

struct ForwardCache {
  Matrix input;
  Matrix extractor_pre;
  Matrix extractor_act;
  Matrix head_pre;
  Matrix head_act;
  Matrix features;  // batch x feature_dim
  Matrix logits;    // batch x num_classes

  friend bool operator==(const ForwardCache&, const ForwardCache&) = default;
};

struct BackwardResult {
  Gradients grads;
  Matrix dfeatures;
};

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;
};

ForwardCache forward(const Backbone& b, const Matrix& batch);

// Only the features; skips the classifier.
Matrix extract_features(const Backbone& b, const Matrix& data);

// (1/B) sum_n w[y_n] * -log softmax(logits_n)[y_n], with its exact gradient.
LossResult weighted_ce_loss(const Matrix& logits, std::span<const int> labels, std::span<const double> class_weights);

BackwardResult backward(const Backbone& b, const ForwardCache& cache, const Matrix& dlogits);

// v <- momentum*v + g + wd*theta; theta <- theta - lr*v.
void sgd_step(Backbone& b, const Gradients& g, const SgdConfig& cfg, BackboneParams& velocity);

void reinit_classifier(Backbone& b, Rng& rng);

// Little-endian binary: 8-byte magic, four u64 dims, then every tensor as f64.
void save_checkpoint(const Backbone& b, const std::filesystem::path& path);
Backbone load_checkpoint(const std::filesystem::path& path);

}  // namespace odc
