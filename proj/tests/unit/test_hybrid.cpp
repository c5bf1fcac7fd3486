#include <doctest.h>

#include "koopnet/hybrid.hpp"
#include "support.hpp"

using namespace koopnet;

namespace {

nn::DenseLayer dense(RealMatrix w, bool relu) {
  nn::DenseLayer l;
  l.bias = RealVector::Zero(w.rows());
  l.weight = std::move(w);
  l.relu = relu;
  return l;
}

// Every g layer and the target apply the same nonnegative matrix M, so on
// nonnegative inputs the whole trajectory is x_{t+1} = M x_t.
scaling::ScaledNetwork linear_network(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.3);
  RealMatrix m(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) m.data()[i] = u(rng);
  nn::MlpModel base;
  base.layers.push_back(dense(testing::random_matrix(3, 2, rng).cwiseAbs(), true));
  base.layers.push_back(dense(m, true));
  base.layers.push_back(dense(testing::random_matrix(2, 3, rng), false));
  scaling::ScaledNetwork s;
  s.base = base;
  s.target_index = 1;
  for (int j = 0; j < 10; ++j) s.g_layers.push_back(dense(m, true));
  return s;
}

scaling::ScaledNetwork small_scaled(std::size_t target, std::uint64_t seed) {
  const std::vector<Eigen::Index> widths{2, 8, 6, 4, 3, 2};
  scaling::ScalingOptions o;
  o.seed = seed;
  o.noise = 0.05;
  return scaling::insert_scaling(nn::make_mlp(widths, seed), target, o);
}

}  // namespace

TEST_CASE("a linear trajectory makes the hybrid exact") {
  std::mt19937_64 rng(7);
  const auto s = linear_network(rng);
  const auto data = data::generate_yinyang(30, 4);
  const auto batch = koopman::collect_trajectories(s, data, 30);
  for (const int h : {1, 2, 5}) {
    const auto dmd = koopman::fit_dmd(koopman::hankelize(batch, h));
    const auto hyb = hybrid::build_hybrid(s, dmd);
    const RealMatrix x = data::generate_yinyang(50, 9).columns();
    const RealMatrix want = nn::forward_batch(s.flattened(), x);
    const RealMatrix got = hybrid::hybrid_forward_batch(hyb, x);
    CHECK((want - got).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("hybrid forward is the documented composition") {
  const auto s = small_scaled(2, 3);
  const auto data = data::generate_yinyang(60, 2);
  const auto dmd = koopman::fit_dmd(koopman::hankelize(koopman::collect_trajectories(s, data, 60), 4));
  const auto hyb = hybrid::build_hybrid(s, dmd);
  CHECK(hyb.d2 == 4);
  CHECK(hyb.k() == 10);
  const RealVector x = data.inputs.row(5).transpose();
  // snapshots 7..10 form the window
  std::vector<RealVector> snaps{nn::apply_layers(s.prefix(), x)};
  for (const auto& g : s.g_layers) snaps.push_back(nn::apply_layers(std::span<const nn::DenseLayer>(&g, 1), snaps.back()));
  RealVector window(4 * 6);
  for (int i = 0; i < 4; ++i) window.segment(i * 6, 6) = snaps[static_cast<std::size_t>(7 + i)];
  const RealVector act = koopman::predict_step(dmd, window).head(4);
  CHECK((hybrid::replaced_activation(hyb, x).col(0) - act).cwiseAbs().maxCoeff() <= 1e-10);
  const RealVector out = nn::apply_layers(s.suffix(), act);
  CHECK((hybrid::hybrid_forward(hyb, x) - out).cwiseAbs().maxCoeff() <= 1e-10);

  auto clamped = hybrid::build_hybrid(s, dmd, true);
  CHECK(hybrid::replaced_activation(clamped, data.columns()).minCoeff() >= 0.0);
}

TEST_CASE("build_hybrid rejects infeasible combinations") {
  const auto s = small_scaled(2, 3);
  const auto data = data::generate_yinyang(20, 2);
  const auto batch = koopman::collect_trajectories(s, data, 20);
  // h = k + 1 fits but cannot run at inference
  const auto dmd11 = koopman::fit_dmd(koopman::hankelize(batch, 11));
  CHECK_THROWS_WITH_AS(hybrid::build_hybrid(s, dmd11), doctest::Contains("exceeds k"), std::invalid_argument);
  const auto other = small_scaled(1, 3);
  const auto dmd = koopman::fit_dmd(koopman::hankelize(batch, 2));
  CHECK_THROWS_AS(hybrid::build_hybrid(other, dmd), std::invalid_argument);
  const auto hyb = hybrid::build_hybrid(s, dmd);
  CHECK_THROWS(hybrid::hybrid_forward(hyb, RealVector::Ones(3)));
}

TEST_CASE("score builds accuracy and confusion") {
  RealMatrix logits(2, 4);
  logits << 1, 0, 0, 5,
            0, 1, 2, 1;
  const std::vector<int> labels{0, 1, 0, 0};
  const auto rep = hybrid::score(logits, labels, 2);
  CHECK(rep.accuracy == 0.75);
  CHECK(rep.samples == 4);
  CHECK(rep.confusion[0][0] == 2);
  CHECK(rep.confusion[0][1] == 1);
  CHECK(rep.confusion[1][1] == 1);
  CHECK_THROWS(hybrid::score(logits, std::vector<int>{0}, 2));
}

TEST_CASE("an untrained model sits near chance") {
  const std::vector<Eigen::Index> widths{2, 8, 6, 4, 3, 2};
  const auto test = data::generate_yinyang(1000, 11);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) total += hybrid::evaluate(nn::make_mlp(widths, seed), test).accuracy;
  CHECK(total / 10.0 == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("hybrid json round trip gives identical outputs") {
  const auto s = small_scaled(1, 8);
  const auto data = data::generate_yinyang(30, 2);
  const auto dmd = koopman::fit_dmd(koopman::hankelize(koopman::collect_trajectories(s, data, 30), 3));
  const auto hyb = hybrid::build_hybrid(s, dmd, true);
  const auto dir = testing::temp_dir("hybrid");
  hybrid::save_hybrid(hyb, dir / "h.json");
  const auto back = hybrid::load_hybrid(dir / "h.json");
  CHECK(back.clamp_relu);
  CHECK(back.step == hyb.step);
  CHECK(hybrid::hybrid_forward_batch(back, data.columns()) == hybrid::hybrid_forward_batch(hyb, data.columns()));
  auto j = hybrid::to_json(hyb);
  j["h"] = 5;
  CHECK_THROWS(hybrid::hybrid_from_json(j));
  std::filesystem::remove_all(dir);
}
