#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "odc/backbone.hpp"
#include "odc/error.hpp"
#include "support.hpp"

using namespace odc;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an odc::Error");
  return ErrorCode::IoError;
}

// 2-2-2 net used for the hand trace below.
Backbone traced_net() {
  Backbone b = Backbone::zeros({2, 2, 2, 2});
  b.params.extractor.weight = Matrix(2, 2, {1.0, -1.0, 0.5, 2.0});
  b.params.extractor.bias = {0.0, -0.5};
  b.params.head_in.weight = Matrix(2, 2, {1.0, 0.0, -1.0, 1.0});
  b.params.head_in.bias = {0.0, 0.0};
  b.params.head_out.weight = Matrix(2, 2, {2.0, 0.0, 0.0, -1.0});
  b.params.head_out.bias = {0.1, 0.0};
  b.params.classifier.weight = Matrix(2, 2, {1.0, 1.0, 0.0, 1.0});
  b.params.classifier.bias = {0.0, 0.0};
  return b;
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("odc_test_" + name); }

}  // namespace

TEST_SUITE("backbone") {

TEST_CASE("zero parameters give zero features and logits") {
  const Backbone b = Backbone::zeros({4, 6, 3, 5});
  Rng rng(1);
  Matrix x(7, 4);
  for (double& v : x.values()) v = rng.normal();
  const ForwardCache c = forward(b, x);
  CHECK(c.features.rows() == 7);
  CHECK(c.features.cols() == 3);
  CHECK(c.logits.rows() == 7);
  CHECK(c.logits.cols() == 5);
  for (double v : c.features.values()) CHECK(v == 0.0);
  for (double v : c.logits.values()) CHECK(v == 0.0);
}

TEST_CASE("identity layers pass a one-hot input through") {
  Backbone b = Backbone::zeros({3, 3, 3, 3});
  const Matrix eye(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  b.params.extractor.weight = eye;
  b.params.head_in.weight = eye;
  b.params.head_out.weight = eye;
  b.params.classifier.weight = eye;
  const ForwardCache c = forward(b, Matrix(1, 3, {1.0, 0.0, 0.0}));
  CHECK(c.extractor_act == Matrix(1, 3, {1.0, 0.0, 0.0}));
  CHECK(c.features == Matrix(1, 3, {1.0, 0.0, 0.0}));
  CHECK(c.logits == Matrix(1, 3, {1.0, 0.0, 0.0}));
  // Negative inputs are cut by the rectifier.
  const ForwardCache n = forward(b, Matrix(1, 3, {-2.0, 3.0, 0.0}));
  CHECK(n.features == Matrix(1, 3, {0.0, 3.0, 0.0}));
}

TEST_CASE("hand-traced 2-2-2 forward") {
  const ForwardCache c = forward(traced_net(), Matrix(1, 2, {1.0, 0.5}));
  CHECK(c.extractor_pre == Matrix(1, 2, {0.5, 1.0}));
  CHECK(c.head_act == Matrix(1, 2, {0.5, 0.5}));
  CHECK(c.features(0, 0) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(c.features(0, 1) == -0.5);
  CHECK(c.logits(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(c.logits(0, 1) == -0.5);
}

TEST_CASE("hand-traced 2-2-2 backward") {
  const Backbone b = traced_net();
  const ForwardCache c = forward(b, Matrix(1, 2, {1.0, 0.5}));
  const std::vector<int> y{0};
  const std::vector<double> w{1.0, 1.0};
  const LossResult lr = weighted_ce_loss(c.logits, y, w);
  const double p0 = 1.0 / (1.0 + std::exp(-1.1));
  const double g = p0 - 1.0;
  CHECK(lr.loss == doctest::Approx(-std::log(p0)).epsilon(1e-14));
  CHECK(lr.dlogits(0, 0) == doctest::Approx(g).epsilon(1e-14));
  CHECK(lr.dlogits(0, 1) == doctest::Approx(-g).epsilon(1e-14));

  const BackwardResult br = backward(b, c, lr.dlogits);
  const Gradients& gr = br.grads;
  auto near = [](double a, double e) { return std::abs(a - e) <= 1e-14; };
  // classifier
  CHECK(near(gr.classifier.weight(0, 0), g * 1.1));
  CHECK(near(gr.classifier.weight(0, 1), g * -0.5));
  CHECK(near(gr.classifier.weight(1, 0), -g * 1.1));
  CHECK(near(gr.classifier.bias[1], -g));
  // dfeatures = W4^T dlogits = (g, 0)
  CHECK(near(br.dfeatures(0, 0), g));
  CHECK(near(br.dfeatures(0, 1), 0.0));
  CHECK(near(gr.head_out.weight(0, 0), 0.5 * g));
  CHECK(near(gr.head_out.weight(0, 1), 0.5 * g));
  CHECK(near(gr.head_out.weight(1, 0), 0.0));
  CHECK(near(gr.head_out.bias[0], g));
  CHECK(near(gr.head_in.weight(0, 0), 2 * g * 0.5));
  CHECK(near(gr.head_in.weight(0, 1), 2 * g * 1.0));
  CHECK(near(gr.head_in.bias[0], 2 * g));
  CHECK(near(gr.head_in.bias[1], 0.0));
  CHECK(near(gr.extractor.weight(0, 0), 2 * g));
  CHECK(near(gr.extractor.weight(0, 1), g));
  CHECK(near(gr.extractor.weight(1, 1), 0.0));
  CHECK(near(gr.extractor.bias[0], 2 * g));
}

TEST_CASE("zero dlogits give zero gradients") {
  Rng rng(2);
  const Backbone b = testing::random_net({4, 5, 3, 3}, rng);
  Matrix x(3, 4);
  for (double& v : x.values()) v = rng.normal();
  const ForwardCache c = forward(b, x);
  const BackwardResult br = backward(b, c, Matrix(3, 3));
  for (auto t : br.grads.tensors()) {
    for (double v : t) CHECK(v == 0.0);
  }
}

TEST_CASE("weighted cross-entropy closed forms") {
  const LossResult a = weighted_ce_loss(Matrix(1, 2, {0.0, 0.0}), std::vector<int>{0}, std::vector<double>{1.0, 1.0});
  CHECK(a.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(a.dlogits(0, 0) == -0.5);
  CHECK(a.dlogits(0, 1) == 0.5);

  // B = 2: gradient is divided by the batch size.
  const LossResult b2 =
      weighted_ce_loss(Matrix(2, 2, {0.0, 0.0, 0.0, 0.0}), std::vector<int>{0, 1}, std::vector<double>{1.0, 1.0});
  CHECK(b2.dlogits(0, 0) == -0.25);
  CHECK(b2.dlogits(1, 1) == -0.25);

  // Zero weight removes a sample entirely.
  const LossResult z =
      weighted_ce_loss(Matrix(2, 2, {3.0, -1.0, 0.2, 0.7}), std::vector<int>{0, 1}, std::vector<double>{0.0, 1.0});
  CHECK(z.dlogits(0, 0) == 0.0);
  CHECK(z.dlogits(0, 1) == 0.0);
  const double only = -std::log(softmax(std::vector<double>{0.2, 0.7})[1]) / 2.0;
  CHECK(z.loss == doctest::Approx(only).epsilon(1e-14));

  CHECK(code_of([] { weighted_ce_loss(Matrix(1, 2), std::vector<int>{2}, std::vector<double>{1, 1}); }) ==
        ErrorCode::LabelOutOfRange);
  CHECK(code_of([] { weighted_ce_loss(Matrix(1, 2), std::vector<int>{-1}, std::vector<double>{1, 1}); }) ==
        ErrorCode::LabelOutOfRange);
}

TEST_CASE("unit weights equal the plain mean cross-entropy") {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    Matrix logits(4, 3);
    for (double& v : logits.values()) v = 3.0 * rng.normal();
    std::vector<int> y(4);
    for (int& v : y) v = static_cast<int>(rng.below(3));
    double plain = 0.0;
    for (std::size_t n = 0; n < 4; ++n) plain -= std::log(softmax(logits.row(n))[static_cast<std::size_t>(y[n])]);
    plain /= 4.0;
    CHECK(std::abs(weighted_ce_loss(logits, y, std::vector<double>{1, 1, 1}).loss - plain) <= 1e-12);
  }
}

TEST_CASE("dlogits match central differences") {
  Rng rng(4);
  Matrix logits(4, 3);
  for (double& v : logits.values()) v = rng.normal();
  const std::vector<int> y{0, 2, 1, 2};
  const std::vector<double> w{0.5, 1.3, 2.0};
  const LossResult lr = weighted_ce_loss(logits, y, w);
  const double h = 1e-5;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Matrix up = logits, down = logits;
    up.values()[i] += h;
    down.values()[i] -= h;
    const double numeric = (weighted_ce_loss(up, y, w).loss - weighted_ce_loss(down, y, w).loss) / (2 * h);
    const double a = lr.dlogits.values()[i];
    CHECK(std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12}) <= 1e-6);
  }
}

TEST_CASE("parameter gradients match central differences") {
  Rng rng(17);
  for (int t = 0; t < 5; ++t) {
    const BackboneDims dims{2 + rng.below(7), 2 + rng.below(7), 2 + rng.below(7), 2 + rng.below(7)};
    const Backbone b = testing::random_net(dims, rng);
    const std::size_t batch = 1 + rng.below(4);
    Matrix x(batch, dims.input_dim);
    for (double& v : x.values()) v = rng.normal();
    std::vector<int> y(batch);
    for (int& v : y) v = static_cast<int>(rng.below(dims.num_classes));
    std::vector<double> w(dims.num_classes);
    for (double& v : w) v = rng.uniform(0.2, 2.0);
    CHECK(testing::max_gradient_rel_error(b, x, y, w) <= 1e-4);
  }
}

TEST_CASE("forward is pure and finite") {
  Rng rng(5);
  const Backbone b = testing::random_net({6, 8, 4, 5}, rng);
  Matrix x(10, 6);
  for (double& v : x.values()) v = 5.0 * rng.normal();
  const ForwardCache a = forward(b, x);
  const ForwardCache c = forward(b, x);
  CHECK(a == c);
  CHECK(all_finite(a.features.values()));
  CHECK(all_finite(a.logits.values()));
  CHECK(extract_features(b, x) == a.features);
  CHECK(code_of([&] { forward(b, Matrix(1, 5)); }) == ErrorCode::DimMismatch);
}

TEST_CASE("sgd_step closed forms") {
  const BackboneDims dims{1, 1, 2, 2};
  Backbone b = Backbone::zeros(dims);
  for (auto t : b.params.tensors())
    for (double& v : t) v = 1.0;
  Gradients g = BackboneParams::zeros(dims);
  for (auto t : g.tensors())
    for (double& v : t) v = 0.5;
  BackboneParams vel = BackboneParams::zeros(dims);
  sgd_step(b, g, {1.0, 0.0, 0.0}, vel);
  for (auto t : b.params.tensors())
    for (double v : t) CHECK(v == 0.5);

  // Zero gradient without decay is a fixed point.
  Backbone fixed = b;
  BackboneParams vel0 = BackboneParams::zeros(dims);
  for (int i = 0; i < 5; ++i) sgd_step(fixed, BackboneParams::zeros(dims), {0.3, 0.9, 0.0}, vel0);
  CHECK(fixed == b);

  // Momentum 0.9: steps of lr*g then lr*1.9*g.
  Backbone m = Backbone::zeros(dims);
  BackboneParams vm = BackboneParams::zeros(dims);
  const SgdConfig cfg{0.1, 0.9, 0.0};
  sgd_step(m, g, cfg, vm);
  CHECK(m.params.classifier.weight(0, 0) == doctest::Approx(-0.05).epsilon(1e-15));
  sgd_step(m, g, cfg, vm);
  CHECK(m.params.classifier.weight(0, 0) == doctest::Approx(-0.05 - 0.1 * 1.9 * 0.5).epsilon(1e-15));

  // Weight decay pulls parameters toward zero.
  Backbone d = Backbone::zeros(dims);
  for (auto t : d.params.tensors())
    for (double& v : t) v = 2.0;
  BackboneParams vd = BackboneParams::zeros(dims);
  sgd_step(d, BackboneParams::zeros(dims), {0.5, 0.0, 0.1}, vd);
  CHECK(d.params.extractor.weight(0, 0) == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("reinit_classifier touches only the classifier") {
  Rng rng(8);
  Backbone b = Backbone::random({4, 6, 3, 5}, rng);
  const Backbone before = b;
  Rng r1(100), r2(100);
  reinit_classifier(b, r1);
  CHECK(b.params.extractor == before.params.extractor);
  CHECK(b.params.head_in == before.params.head_in);
  CHECK(b.params.head_out == before.params.head_out);
  CHECK_FALSE(b.params.classifier.weight == before.params.classifier.weight);
  Backbone again = before;
  reinit_classifier(again, r2);
  CHECK(again == b);
  const double bound = 1.0 / std::sqrt(3.0);
  for (double v : b.params.classifier.weight.values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("checkpoint round trip and corruption") {
  Rng rng(12);
  const Backbone b = testing::random_net({5, 7, 3, 4}, rng);
  const fs::path p = temp_path("ckpt.bin");
  save_checkpoint(b, p);
  CHECK(load_checkpoint(p) == b);

  const auto full = fs::file_size(p);
  fs::resize_file(p, full - 3);
  CHECK(code_of([&] { load_checkpoint(p); }) == ErrorCode::CorruptCheckpoint);
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << "NOTACKPT and some bytes";
  }
  CHECK(code_of([&] { load_checkpoint(p); }) == ErrorCode::CorruptCheckpoint);
  fs::remove(p);
  CHECK(code_of([&] { load_checkpoint(p); }) == ErrorCode::CorruptCheckpoint);
}

}
