#include "odc/backbone.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "odc/error.hpp"

namespace odc {

namespace {

constexpr std::string_view kCheckpointMagic = "ODCBKBN1";

Affine zero_affine(std::size_t in, std::size_t out) { return Affine{Matrix(out, in), Vector(out, 0.0)}; }

void init_affine(Affine& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
  for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

// out = x * W^T + b
Matrix affine_forward(const Affine& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw Error(ErrorCode::DimMismatch, "layer expects " + std::to_string(layer.in_dim()) + " inputs, got " +
                                            std::to_string(x.cols()));
  }
  Matrix out = matmul_transposed(x, layer.weight);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias[j];
  }
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

// Accumulates dW = dout^T x, db = colsum(dout); returns dx = dout W.
Matrix affine_backward(const Affine& layer, const Matrix& x, const Matrix& dout, Affine& grad) {
  const std::size_t batch = x.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  for (std::size_t n = 0; n < batch; ++n) {
    auto xn = x.row(n);
    auto dn = dout.row(n);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = dn[o];
      if (d == 0.0) continue;
      auto gw = grad.weight.row(o);
      for (std::size_t i = 0; i < in; ++i) gw[i] += d * xn[i];
      grad.bias[o] += d;
    }
  }
  Matrix dx(batch, in);
  for (std::size_t n = 0; n < batch; ++n) {
    auto dn = dout.row(n);
    auto dxn = dx.row(n);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = dn[o];
      if (d == 0.0) continue;
      auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < in; ++i) dxn[i] += d * w[i];
    }
  }
  return dx;
}

// Rectifier subgradient at zero is zero.
void relu_backward_inplace(Matrix& grad, const Matrix& pre) {
  auto& g = grad.values();
  const auto& z = pre.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(z[i] > 0.0)) g[i] = 0.0;
  }
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " has shape " + std::to_string(m.rows()) + "x" +
                                              std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                                              std::to_string(cols));
  }
}

}  // namespace

BackboneParams BackboneParams::zeros(const BackboneDims& dims) {
  return BackboneParams{
      zero_affine(dims.input_dim, dims.hidden_dim),
      zero_affine(dims.hidden_dim, dims.feature_dim),
      zero_affine(dims.feature_dim, dims.feature_dim),
      zero_affine(dims.feature_dim, dims.num_classes),
  };
}

std::vector<std::span<double>> BackboneParams::tensors() {
  return {extractor.weight.values(), extractor.bias, head_in.weight.values(), head_in.bias,
          head_out.weight.values(),  head_out.bias,  classifier.weight.values(), classifier.bias};
}

std::vector<std::span<const double>> BackboneParams::tensors() const {
  return {extractor.weight.values(), extractor.bias, head_in.weight.values(), head_in.bias,
          head_out.weight.values(),  head_out.bias,  classifier.weight.values(), classifier.bias};
}

Backbone Backbone::zeros(const BackboneDims& dims) {
  if (dims.input_dim == 0 || dims.hidden_dim == 0 || dims.feature_dim < 2 || dims.num_classes == 0) {
    throw Error(ErrorCode::InvalidConfig, "backbone dims must be positive and feature_dim >= 2");
  }
  return Backbone{dims, BackboneParams::zeros(dims)};
}

Backbone Backbone::random(const BackboneDims& dims, Rng& rng) {
  Backbone b = zeros(dims);
  init_affine(b.params.extractor, rng);
  init_affine(b.params.head_in, rng);
  init_affine(b.params.head_out, rng);
  init_affine(b.params.classifier, rng);
  return b;
}

ForwardCache forward(const Backbone& b, const Matrix& batch) {
  if (batch.cols() != b.dims.input_dim) {
    throw Error(ErrorCode::DimMismatch, "batch has " + std::to_string(batch.cols()) + " columns, backbone expects " +
                                            std::to_string(b.dims.input_dim));
  }
  ForwardCache c;
  c.input = batch;
  c.extractor_pre = affine_forward(b.params.extractor, batch);
  c.extractor_act = relu(c.extractor_pre);
  c.head_pre = affine_forward(b.params.head_in, c.extractor_act);
  c.head_act = relu(c.head_pre);
  c.features = affine_forward(b.params.head_out, c.head_act);
  c.logits = affine_forward(b.params.classifier, c.features);
  return c;
}

Matrix extract_features(const Backbone& b, const Matrix& data) {
  if (data.cols() != b.dims.input_dim) {
    throw Error(ErrorCode::DimMismatch, "data has " + std::to_string(data.cols()) + " columns, backbone expects " +
                                            std::to_string(b.dims.input_dim));
  }
  Matrix h = relu(affine_forward(b.params.extractor, data));
  h = relu(affine_forward(b.params.head_in, h));
  return affine_forward(b.params.head_out, h);
}

LossResult weighted_ce_loss(const Matrix& logits, std::span<const int> labels, std::span<const double> class_weights) {
  if (logits.rows() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "logits rows must equal label count");
  }
  if (class_weights.size() != logits.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "one class weight per logit column required");
  }
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  LossResult out{0.0, Matrix(batch, classes)};
  if (batch == 0) return out;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y) + " at row " + std::to_string(n));
    }
    const double w = class_weights[static_cast<std::size_t>(y)];
    if (w == 0.0) continue;
    auto z = logits.row(n);
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double total = 0.0;
    for (double v : z) total += std::exp(v - mx);
    const double log_norm = mx + std::log(total);
    out.loss += w * (log_norm - z[static_cast<std::size_t>(y)]) * inv_b;
    auto d = out.dlogits.row(n);
    for (std::size_t j = 0; j < classes; ++j) d[j] = w * inv_b * std::exp(z[j] - log_norm);
    d[static_cast<std::size_t>(y)] -= w * inv_b;
  }
  return out;
}

BackwardResult backward(const Backbone& b, const ForwardCache& cache, const Matrix& dlogits) {
  const std::size_t batch = cache.input.rows();
  require_shape(cache.input, batch, b.dims.input_dim, "cache input");
  require_shape(cache.extractor_pre, batch, b.dims.hidden_dim, "cache extractor");
  require_shape(cache.head_pre, batch, b.dims.feature_dim, "cache head");
  require_shape(cache.features, batch, b.dims.feature_dim, "cache features");
  require_shape(dlogits, batch, b.dims.num_classes, "dlogits");

  BackwardResult r{BackboneParams::zeros(b.dims), Matrix()};
  r.dfeatures = affine_backward(b.params.classifier, cache.features, dlogits, r.grads.classifier);
  Matrix dhead = affine_backward(b.params.head_out, cache.head_act, r.dfeatures, r.grads.head_out);
  relu_backward_inplace(dhead, cache.head_pre);
  Matrix dext = affine_backward(b.params.head_in, cache.extractor_act, dhead, r.grads.head_in);
  relu_backward_inplace(dext, cache.extractor_pre);
  affine_backward(b.params.extractor, cache.input, dext, r.grads.extractor);
  return r;
}

void sgd_step(Backbone& b, const Gradients& g, const SgdConfig& cfg, BackboneParams& velocity) {
  auto theta = b.params.tensors();
  auto grad = g.tensors();
  auto vel = velocity.tensors();
  if (theta.size() != grad.size() || theta.size() != vel.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter/gradient/velocity layout mismatch");
  }
  for (std::size_t t = 0; t < theta.size(); ++t) {
    if (theta[t].size() != grad[t].size() || theta[t].size() != vel[t].size()) {
      throw Error(ErrorCode::ShapeMismatch, "tensor size mismatch in sgd_step");
    }
    for (std::size_t i = 0; i < theta[t].size(); ++i) {
      vel[t][i] = cfg.momentum * vel[t][i] + grad[t][i] + cfg.weight_decay * theta[t][i];
      theta[t][i] -= cfg.learning_rate * vel[t][i];
    }
  }
}

void reinit_classifier(Backbone& b, Rng& rng) { init_affine(b.params.classifier, rng); }

void save_checkpoint(const Backbone& b, const std::filesystem::path& path) {
  detail::BinaryWriter w;
  w.magic(kCheckpointMagic);
  w.u64(b.dims.input_dim);
  w.u64(b.dims.hidden_dim);
  w.u64(b.dims.feature_dim);
  w.u64(b.dims.num_classes);
  for (auto t : b.params.tensors()) {
    for (double v : t) w.f64(v);
  }
  w.write_to(path);
}

Backbone load_checkpoint(const std::filesystem::path& path) {
  detail::BinaryReader r(path, ErrorCode::CorruptCheckpoint);
  r.expect_magic(kCheckpointMagic);
  BackboneDims dims;
  dims.input_dim = r.u64();
  dims.hidden_dim = r.u64();
  dims.feature_dim = r.u64();
  dims.num_classes = r.u64();
  constexpr std::uint64_t kMaxDim = 1u << 20;
  if (dims.input_dim == 0 || dims.hidden_dim == 0 || dims.feature_dim < 2 || dims.num_classes == 0 ||
      dims.input_dim > kMaxDim || dims.hidden_dim > kMaxDim || dims.feature_dim > kMaxDim ||
      dims.num_classes > kMaxDim) {
    r.fail("implausible dims header");
  }
  Backbone b = Backbone::zeros(dims);
  std::size_t expected = 0;
  for (auto t : b.params.tensors()) expected += t.size();
  if (r.remaining() != expected * 8) r.fail("parameter payload size does not match dims");
  for (auto t : b.params.tensors()) {
    for (double& v : t) {
      v = r.f64();
      if (!std::isfinite(v)) r.fail("non-finite parameter");
    }
  }
  r.expect_end();
  return b;
}

}  // namespace odc
