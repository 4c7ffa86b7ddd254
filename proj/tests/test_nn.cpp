#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mmgesture/errors.hpp"
#include "mmgesture/models.hpp"
#include "mmgesture/nn/gradcheck.hpp"
#include "mmgesture/nn/layers.hpp"
#include "mmgesture/nn/loss.hpp"
#include "mmgesture/nn/network.hpp"
#include "mmgesture/nn/optim.hpp"
#include "mmgesture/nn/serialize.hpp"
#include "test_support.hpp"

using namespace mmgesture;
using nn::LayerKind;
using nn::LayerSpec;
using nn::Network;
using nn::Tensor;

namespace {

// Direct 7-loop convolution with zero padding.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                          const LayerSpec& s) {
  const std::size_t cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const std::size_t ho = (h + 2 * s.padding - s.kernel) / s.stride + 1;
  const std::size_t wo = (wd + 2 * s.padding - s.kernel) / s.stride + 1;
  const std::size_t cin_g = cin / s.groups, cout_g = s.out_channels / s.groups;
  Tensor<double> y({s.out_channels, ho, wo});
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    const std::size_t g = o / cout_g;
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        double acc = b.values[o];
        for (std::size_t ci = 0; ci < cin_g; ++ci) {
          for (std::size_t ki = 0; ki < s.kernel; ++ki) {
            for (std::size_t kj = 0; kj < s.kernel; ++kj) {
              const long r = static_cast<long>(i * s.stride + ki) - static_cast<long>(s.padding);
              const long c = static_cast<long>(j * s.stride + kj) - static_cast<long>(s.padding);
              if (r < 0 || c < 0 || r >= static_cast<long>(h) || c >= static_cast<long>(wd)) continue;
              const double xv = x.values[((g * cin_g + ci) * h + static_cast<std::size_t>(r)) * wd +
                                         static_cast<std::size_t>(c)];
              acc += w.values[((o * cin_g + ci) * s.kernel + ki) * s.kernel + kj] * xv;
            }
          }
        }
        y.values[(o * ho + i) * wo + j] = acc;
      }
    }
  }
  return y;
}

}  // namespace

TEST_CASE("tensor and weights basics") {
  Tensor<double> t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(nn::shape_size({2, 3, 4}) == 24);
  CHECK(nn::shape_string({2, 3}) == "[2x3]");
  CHECK(t.all_finite());
  t.values[1] = NAN;
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(Tensor<double>({2, 2}, std::vector<double>(3)), ShapeError);

  nn::ModelWeights<double> w;
  w.add("a", {2});
  CHECK_THROWS_AS(w.add("a", {3}), InvalidArgument);
  CHECK(w.find("b") == nullptr);
  CHECK_THROWS(w.at("b"));
}

TEST_CASE("convolution matches the direct sum") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t groups = (trial % 3 == 0) ? 2 : 1;
    const std::size_t cin = 2 * (1 + rng() % 2), cout = 2 * (1 + rng() % 3);
    const std::size_t k = (rng() % 2) ? 3 : 1, stride = 1 + rng() % 2;
    const std::size_t h = 3 + rng() % 5, wd = 3 + rng() % 5;
    const auto spec = LayerSpec::conv(cin, cout, k, stride, groups);
    Network<double> net({cin, h, wd});
    net.add(spec, {net.input()}, "c");
    testing::randomize(net, static_cast<std::uint64_t>(trial));
    const auto x = testing::random_tensor({cin, h, wd}, static_cast<std::uint64_t>(trial));
    const auto& y = net.forward(x);
    const auto expect = naive_conv(x, net.weights().at("c.weight"), net.weights().at("c.bias"), spec);
    REQUIRE(y.shape == expect.shape);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.values[i] == doctest::Approx(expect.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("identity 1x1 convolution and relu") {
  Network<double> net({3, 4, 4});
  net.add(LayerSpec::conv(3, 3, 1), {net.input()}, "c");
  auto& w = net.weights().at("c.weight");
  std::fill(w.values.begin(), w.values.end(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) w.values[i * 3 + i] = 1.0;
  const auto x = testing::random_tensor({3, 4, 4}, 3);
  CHECK(net.forward(x).values == x.values);

  Network<double> relu({3});
  relu.then(LayerSpec::of(LayerKind::ReLU));
  CHECK(relu.forward(Tensor<double>({3}, std::vector<double>{-1.0, 0.0, 2.0})).values ==
        std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("layer shape algebra") {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + 2 * (rng() % 3), s = 1 + rng() % 3, p = rng() % 3;
    const std::size_t n = k + rng() % 20;
    CHECK(nn::conv_output_extent(n, k, s, p) == (n + 2 * p - k) / s + 1);
  }
  Network<double> net({4, 8, 6});
  const auto c = net.add(LayerSpec::conv(4, 5, 3, 2), {net.input()}, "c");
  CHECK(net.output_shape() == nn::Shape{5, 4, 3});
  net.add(LayerSpec::of(LayerKind::Upsample2x), {c}, "up");
  CHECK(net.output_shape() == nn::Shape{5, 8, 6});
  net.add(LayerSpec::of(LayerKind::MaxPool2x2), {net.node_count() - 1}, "pool");
  CHECK(net.output_shape() == nn::Shape{5, 4, 3});
  net.add(LayerSpec::of(LayerKind::GlobalAvgPool), {net.node_count() - 1}, "gap");
  CHECK(net.output_shape() == nn::Shape{5});

  // errors name the offending layer
  Network<double> bad({4, 8, 8});
  try {
    bad.add(LayerSpec::conv(3, 5), {bad.input()}, "enc9");
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("enc9") != std::string::npos);
  }
  Network<double> cat({2, 4, 4});
  const auto pooled = cat.add(LayerSpec::of(LayerKind::MaxPool2x2), {cat.input()}, "p");
  CHECK_THROWS_AS(cat.add(LayerSpec::of(LayerKind::Concat), {pooled, cat.input()}, "cat"), ShapeError);
  CHECK_THROWS_AS(net.forward(Tensor<double>({4, 8, 7})), ShapeError);
  CHECK_THROWS_AS(LayerSpec::conv(4, 6, 3, 1, 4).validate(), InvalidArgument);
}

TEST_CASE("backward needs a forward") {
  Network<double> net({3});
  net.then(LayerSpec::dense(3, 2));
  CHECK_THROWS_AS(net.backward(Tensor<double>({2})), StateError);
  net.forward(Tensor<double>({3}, 1.0));
  net.weights().zero_grad();
  CHECK_NOTHROW(net.backward(Tensor<double>({2}, 1.0)));
  // the tape is consumed
  CHECK_THROWS_AS(net.backward(Tensor<double>({2}, 1.0)), StateError);
}

TEST_CASE("dense gradient is the outer product") {
  Network<double> net({3});
  net.then(LayerSpec::dense(3, 2), "d");
  net.initialize(1);
  const Tensor<double> x({3}, std::vector<double>{1.0, -2.0, 0.5});
  net.forward(x);
  net.weights().zero_grad();
  net.backward(Tensor<double>({2}, 1.0));  // loss = sum(y)
  const auto& g = net.weights().at("d.weight").grad;
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) CHECK(g[o * 3 + i] == x.values[i]);
  CHECK(net.weights().at("d.bias").grad == std::vector<double>{1.0, 1.0});
}

TEST_CASE("gradient check of every layer kind") {
  for (const auto& c : testing::layer_cases()) {
    CAPTURE(c.name);
    const auto report = testing::check_case(c, 3, 1e-4);
    INFO(report.summary());
    CHECK(report.passed);
    CHECK(report.max_error() < 1e-4);
  }
}

TEST_CASE("linear model gradients are exact to rounding") {
  Network<double> net({6});
  net.then(LayerSpec::dense(6, 4));
  net.then(LayerSpec::dense(4, 3));
  testing::randomize(net, 2);
  const auto report = nn::gradient_check(net, testing::random_tensor({6}, 1), 1e-7);
  INFO(report.summary());
  CHECK(report.passed);
}

TEST_CASE("gradient check of the full models") {
  nn::GradCheckOptions opt;
  opt.max_checks_per_tensor = 12;

  DenoiserSpec ds;
  ds.height = ds.width = 16;
  auto unet = build_denoiser<double>(ds);
  testing::randomize(unet, 1);
  const auto r1 = nn::gradient_check(unet, testing::random_tensor({1, 16, 16}, 11, 0.0, 1.0), 1e-4, opt);
  INFO(r1.summary());
  CHECK(r1.passed);
  CHECK(r1.skipped() * 10 <= r1.checked() + r1.skipped());

  ClassifierSpec cs;
  cs.height = cs.width = 16;
  auto clf = build_classifier<double>(cs);
  testing::randomize(clf, 6);
  const auto r2 = nn::gradient_check(clf, testing::random_tensor({1, 16, 16}, 7, 0.0, 1.0), 1e-4, opt);
  INFO(r2.summary());
  CHECK(r2.passed);
  CHECK(r2.skipped() * 10 <= r2.checked() + r2.skipped());
}

TEST_CASE("difference quotients across a ReLU kink are skipped") {
  // Zero input and zero bias put every pre-activation exactly on the kink.
  nn::Network<double> net({3});
  net.then(LayerSpec::dense(3, 2), "d");
  net.then(LayerSpec::of(LayerKind::ReLU));
  net.initialize(1);
  const Tensor<double> x({3}, 0.0);
  nn::GradCheckOptions raw;
  raw.skip_kinks = false;
  CHECK_FALSE(nn::gradient_check(net, x, 1e-4, raw).passed);
  const auto r = nn::gradient_check(net, x, 1e-4);
  CHECK(r.passed);
  CHECK(r.skipped() > 0);
}

TEST_CASE("gradient check catches a broken backward") {
  Network<double> net({4});
  net.add(std::make_unique<testing::SignFlipped>(nn::make_layer<double>(LayerSpec::dense(4, 3))),
          {net.input()}, "flipped");
  testing::randomize(net, 1);
  const auto report = nn::gradient_check(net, testing::random_tensor({4}, 2), 1e-4);
  CHECK_FALSE(report.passed);
  CHECK(report.max_error() > 1.0);
}

TEST_CASE("forward and backward are deterministic") {
  ClassifierSpec cs;
  cs.height = cs.width = 16;
  auto a = build_classifier<float>(cs);
  auto b = build_classifier<float>(cs);
  a.initialize(3);
  b.initialize(3);
  const auto x = testing::random_tensor({1, 16, 16}, 1).cast<float>();
  for (auto* net : {&a, &b}) {
    net->forward(x, true);
    net->weights().zero_grad();
    net->backward(Tensor<float>({4}, 1.0f));
  }
  CHECK(a.output().values == b.output().values);
  for (std::size_t i = 0; i < a.weights().size(); ++i) {
    CHECK(a.weights().entry(i).tensor.grad == b.weights().entry(i).tensor.grad);
    CHECK(a.weights().entry(i).tensor.values == b.weights().entry(i).tensor.values);
  }
}

TEST_CASE("batch channel scale") {
  Network<double> net({2, 2, 2});
  net.then(LayerSpec::batch_channel_scale(2), "bn");
  net.initialize(1);
  const Tensor<double> x({2, 2, 2}, std::vector<double>{1, 2, 3, 4, 5, 5, 5, 5});
  // inference with unit estimates is the identity up to epsilon
  const auto y = net.forward(x, false);
  for (std::size_t i = 0; i < 8; ++i) CHECK(y.values[i] == doctest::Approx(x.values[i]).epsilon(1e-4));
  CHECK(net.weights().at("bn.running_mean").values == std::vector<double>{0.0, 0.0});
  // a training pass moves the estimates toward the sample statistics
  net.forward(x, true);
  const auto& m = net.weights().at("bn.running_mean").values;
  CHECK(m[0] == doctest::Approx(0.01 * 2.5));
  CHECK(m[1] == doctest::Approx(0.01 * 5.0));
  const auto& v = net.weights().at("bn.running_var").values;
  CHECK(v[0] == doctest::Approx(0.99 + 0.01 * 1.25));
  CHECK(v[1] == doctest::Approx(0.99));
}

TEST_CASE("mse loss") {
  const auto y = testing::random_tensor({2, 3, 3}, 1);
  const auto same = nn::mse_loss(y, y);
  CHECK(same.loss == 0.0);
  for (double g : same.grad.values) CHECK(g == 0.0);
  Tensor<double> z(y.shape, 0.0);
  const auto r = nn::mse_loss(y, z);
  double expect = 0.0;
  for (double v : y.values) expect += v * v;
  CHECK(r.loss == doctest::Approx(expect / 18.0));
  CHECK(r.grad.values[0] == doctest::Approx(2.0 * y.values[0] / 18.0));
  CHECK_THROWS_AS(nn::mse_loss(y, Tensor<double>({18})), ShapeError);
}

TEST_CASE("softmax cross-entropy") {
  const Tensor<double> flat({4}, 0.0);
  const auto r = nn::softmax_cross_entropy(flat, 2);
  for (double p : r.probabilities) CHECK(p == doctest::Approx(0.25));
  CHECK(r.loss == doctest::Approx(std::log(4.0)));

  const Tensor<double> big({4}, std::vector<double>{1000.0, 0.0, 0.0, 0.0});
  const auto rb = nn::softmax_cross_entropy(big, 0);
  CHECK(std::isfinite(rb.loss));
  CHECK(rb.loss == doctest::Approx(0.0));
  CHECK(std::isfinite(nn::softmax_cross_entropy(big, 1).loss));

  CHECK_THROWS_AS(nn::softmax_cross_entropy(flat, 4), InvalidArgument);

  // finite-difference oracle for the gradient
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> z({4});
    for (auto& v : z.values) v = uniform(rng, -5.0, 5.0);
    const std::size_t label = rng() % 4;
    const auto res = nn::softmax_cross_entropy(z, label);
    double psum = 0.0;
    for (double p : res.probabilities) psum += p;
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 4; ++i) {
      auto zp = z, zm = z;
      zp.values[i] += 1e-6;
      zm.values[i] -= 1e-6;
      const double fd = (nn::softmax_cross_entropy(zp, label).loss - nn::softmax_cross_entropy(zm, label).loss) / 2e-6;
      CHECK(std::abs(fd - res.grad.values[i]) < 1e-6);
    }
  }
}

TEST_CASE("argmax ties go to the lowest index") {
  const std::vector<double> v{0.1, 0.4, 0.4, 0.1};
  CHECK(nn::argmax<double>(v) == 1);
  const std::vector<double> flat(4, 0.25);
  CHECK(nn::argmax<double>(flat) == 0);
}

TEST_CASE("adam") {
  SUBCASE("zero gradients leave parameters and advance the step") {
    nn::ModelWeights<double> w;
    w.add("p", {3}, true, 0.5);
    w.zero_grad();
    w.mark_gradients_ready();
    nn::adam_step(w, nn::AdamConfig{});
    CHECK(w.at("p").values == std::vector<double>(3, 0.5));
    CHECK(w.step() == 1);
  }
  SUBCASE("first step moves by the learning rate") {
    nn::ModelWeights<double> w;
    w.add("p", {2}, true, 1.0);
    w.zero_grad();
    w.at("p").grad = {3.0, -0.01};
    w.mark_gradients_ready();
    nn::AdamConfig cfg;
    cfg.learning_rate = 0.01;
    nn::adam_step(w, cfg);
    // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
    CHECK(w.at("p").values[0] == doctest::Approx(1.0 - 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
    CHECK(w.at("p").values[1] == doctest::Approx(1.0 + 0.01 * 0.01 / (0.01 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("frozen tensors are not updated") {
    nn::ModelWeights<double> w;
    w.add("stat", {1}, false, 2.0);
    w.add("p", {1}, true, 2.0);
    w.zero_grad();
    w.at("stat").grad = {1.0};
    w.at("p").grad = {1.0};
    w.mark_gradients_ready();
    nn::adam_step(w, nn::AdamConfig{});
    CHECK(w.at("stat").values[0] == 2.0);
    CHECK(w.at("p").values[0] < 2.0);
  }
  SUBCASE("quadratic bowl converges") {
    nn::ModelWeights<double> w;
    w.add("p", {2}, true);
    w.at("p").values = {3.0, -2.0};
    nn::AdamConfig cfg;
    cfg.learning_rate = 0.1;
    for (int i = 0; i < 500; ++i) {
      w.zero_grad();
      w.at("p").grad = {2.0 * w.at("p").values[0], 2.0 * w.at("p").values[1]};
      w.mark_gradients_ready();
      nn::adam_step(w, cfg);
    }
    CHECK(std::abs(w.at("p").values[0]) < 1e-2);
    CHECK(std::abs(w.at("p").values[1]) < 1e-2);
  }
  SUBCASE("no gradients is a state error") {
    nn::ModelWeights<double> w;
    w.add("p", {1});
    w.zero_grad();
    CHECK_THROWS_AS(nn::adam_step(w, nn::AdamConfig{}), StateError);
  }
}

TEST_CASE("weights round trip through NNW1") {
  const auto dir = testing::scratch_dir("nnw");
  const auto path = (dir / "m.nnw").string();
  ClassifierSpec cs;
  auto a = build_classifier<float>(cs);
  a.initialize(9);
  nn::save_weights(path, a.weights());
  auto b = build_classifier<float>(cs);
  b.initialize(1);
  nn::load_weights(path, b.weights());
  for (std::size_t i = 0; i < a.weights().size(); ++i) {
    CHECK(a.weights().entry(i).tensor.values == b.weights().entry(i).tensor.values);
  }

  // a different architecture is rejected
  ClassifierSpec other = cs;
  other.stem_channels = 12;
  auto c = build_classifier<float>(other);
  CHECK_THROWS_AS(nn::load_weights(path, c.weights()), ShapeError);

  // a file missing a tensor is rejected
  nn::ModelWeights<float> partial;
  partial.add("head.weight", a.weights().at("head.weight").shape);
  nn::save_weights(path, partial);
  CHECK_THROWS(nn::load_weights(path, b.weights()));

  { std::ofstream(path, std::ios::binary) << "JUNKJUNK"; }
  CHECK_THROWS_AS(nn::load_weights(path, b.weights()), IOError);
  CHECK_THROWS_AS(nn::load_weights((dir / "none.nnw").string(), b.weights()), IOError);
}
