#include <doctest.h>

#include <cmath>

#include "koopnet/nn.hpp"
#include "support.hpp"

using namespace koopnet;

namespace {

nn::MlpModel small_model(std::uint64_t seed, bool relu_output = false) {
  const std::vector<Eigen::Index> widths{3, 5, 4, 2};
  return nn::make_mlp(widths, seed, relu_output);
}

// forward pass written out by hand
RealVector manual_forward(const nn::MlpModel& m, RealVector x) {
  for (const auto& l : m.layers) {
    x = l.weight * x + l.bias;
    if (l.relu) x = x.cwiseMax(0.0);
  }
  return x;
}

}  // namespace

TEST_CASE("make_mlp builds the requested widths and init range") {
  const std::vector<Eigen::Index> widths{784, 256, 32, 16, 10, 10};
  const auto m = nn::make_mlp(widths, 5);
  REQUIRE(m.layers.size() == 5);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    CHECK(l.in_dim() == widths[i]);
    CHECK(l.out_dim() == widths[i + 1]);
    CHECK(l.relu == (i + 1 < m.layers.size()));
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[i]));
    CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.bias.cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(nn::make_mlp(widths, 5).layers[2].weight == m.layers[2].weight);
  CHECK(nn::make_mlp(widths, 6).layers[2].weight != m.layers[2].weight);
}

TEST_CASE("forward matches a hand-written pass and records activations") {
  const auto m = small_model(3);
  const RealVector x = RealVector::LinSpaced(3, -1.0, 2.0);
  const auto f = nn::forward(m, x);
  CHECK((f.logits - manual_forward(m, x)).cwiseAbs().maxCoeff() <= 1e-15);
  REQUIRE(f.activations.size() == m.layers.size());
  CHECK(f.activations.back() == f.logits);
  RealMatrix batch(3, 2);
  batch.col(0) = x;
  batch.col(1) = -x;
  const RealMatrix out = nn::forward_batch(m, batch);
  CHECK((out.col(1) - manual_forward(m, -x)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("losses match closed forms") {
  RealVector p(3), t(3);
  p << 0.0, 2.0, -0.5;
  t << 0.5, 0.0, -0.5;
  // 0.5*0.25, 1*(2-0.5), 0 averaged
  CHECK(nn::huber_loss(p, t, 1.0) == doctest::Approx((0.125 + 1.5 + 0.0) / 3.0).epsilon(1e-14));
  RealVector logits(3);
  logits << 1.0, 2.0, 3.0;
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(nn::cross_entropy_loss(logits, 0) == doctest::Approx(lse - 1.0).epsilon(1e-14));
  // large logits stay finite
  logits << 1000.0, 0.0, -1000.0;
  CHECK(std::isfinite(nn::cross_entropy_loss(logits, 2)));
}

TEST_CASE("backprop agrees with central differences") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto m = small_model(seed);
    // shift biases so no pre-activation sits on the ReLU kink
    for (auto& l : m.layers) l.bias.array() += 0.05;
    std::mt19937_64 rng(seed);
    const RealVector x = testing::random_matrix(3, 1, rng);
    CHECK(nn::grad_check(m, x, 1, nn::CrossEntropy{}) <= 1e-4);
    const RealVector target = testing::random_matrix(2, 1, rng);
    CHECK(nn::grad_check(m, x, target, nn::Huber{1.0}) <= 1e-4);
    CHECK(nn::grad_check(m, x, target, nn::Huber{0.1}) <= 1e-4);
  }
}

TEST_CASE("first AdamW step matches the closed form") {
  auto m = small_model(9);
  const auto before = m;
  nn::Gradients g;
  std::mt19937_64 rng(4);
  for (const auto& l : m.layers) {
    g.weight.push_back(testing::random_matrix(l.out_dim(), l.in_dim(), rng));
    g.bias.push_back(testing::random_matrix(l.out_dim(), 1, rng));
  }
  nn::TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.1;
  nn::AdamWState state;
  nn::adamw_step(m, g, state, cfg, cfg.lr);
  // bias-corrected moments are g and g^2 after one step
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const RealMatrix expect =
        (before.layers[l].weight * (1.0 - cfg.lr * cfg.weight_decay)).array() -
        cfg.lr * g.weight[l].array() / (g.weight[l].array().abs() + cfg.eps);
    CHECK((m.layers[l].weight - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("training lowers the loss and leaves frozen layers untouched") {
  std::mt19937_64 rng(77);
  data::LabeledDataset d;
  d.inputs = testing::random_matrix(200, 3, rng);
  d.n_classes = 2;
  for (Eigen::Index i = 0; i < d.size(); ++i) d.labels.push_back(d.inputs(i, 0) + d.inputs(i, 1) > 0 ? 1 : 0);
  auto m = small_model(2);
  m.layers[1].trainable = false;
  const auto frozen = m.layers[1];
  nn::TrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 1e-2;
  cfg.batch_size = 50;
  cfg.seed = 3;
  const auto rep = nn::train(m, d, cfg);
  REQUIRE(rep.epochs.size() == 60);
  CHECK(rep.final_loss() < rep.epochs.front().loss);
  CHECK(nn::accuracy(m, d) > 0.85);
  CHECK(m.layers[1].weight == frozen.weight);
  CHECK(m.layers[1].bias == frozen.bias);

  // same seed, same result
  auto m2 = small_model(2);
  m2.layers[1].trainable = false;
  nn::train(m2, d, cfg);
  CHECK(m2.layers[0].weight == m.layers[0].weight);
}

TEST_CASE("plateau tracker halves after patience bad epochs only") {
  nn::PlateauTracker t({0.5, 2, 1e-4});
  CHECK(t.observe(1.0) == 1.0);
  CHECK(t.observe(0.9) == 1.0);
  CHECK(t.observe(0.95) == 1.0);   // 1 bad
  CHECK(t.observe(0.9) == 0.5);    // 2 bad -> halve
  CHECK(t.observe(0.91) == 1.0);   // counter restarted
  CHECK(t.observe(0.5) == 1.0);    // improvement
  CHECK(t.observe(0.49999) == 1.0);  // below threshold: bad
  CHECK(t.observe(0.5) == 0.5);
}

TEST_CASE("train config validation and non-finite loss") {
  nn::TrainConfig cfg;
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  data::LabeledDataset d;
  d.inputs = RealMatrix::Constant(4, 3, 1e308);
  d.labels = {0, 1, 0, 1};
  d.n_classes = 2;
  auto m = small_model(1);
  nn::TrainConfig c;
  c.epochs = 2;
  c.lr = 1e10;
  c.batch_size = 4;
  CHECK_THROWS_AS(nn::train(m, d, c), nn::NonFiniteLossError);
}

TEST_CASE("model json round trip is bit exact") {
  const auto m = small_model(12, true);
  const auto dir = testing::temp_dir("nn");
  nn::save_model(m, dir / "m.json");
  const auto back = nn::load_model(dir / "m.json");
  REQUIRE(back.layers.size() == m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    CHECK(back.layers[i].weight == m.layers[i].weight);
    CHECK(back.layers[i].bias == m.layers[i].bias);
    CHECK(back.layers[i].relu == m.layers[i].relu);
  }
  CHECK(back.seed == m.seed);
  auto j = nn::to_json(m);
  j["layers"][0]["rows"] = 99;
  CHECK_THROWS(nn::model_from_json(j));
  std::filesystem::remove_all(dir);
}
