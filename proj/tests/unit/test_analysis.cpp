#include <doctest.h>

#include <cstdlib>

#include "koopnet/analysis.hpp"
#include "support.hpp"

using namespace koopnet;

namespace {

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < s.size()) {
    const auto end = s.find('\n', start);
    REQUIRE(end != std::string::npos);  // every line is terminated
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

pipeline::RunConfig tiny_config(const std::filesystem::path& out) {
  auto cfg = pipeline::yinyang_defaults();
  cfg.out = out.string();
  cfg.seed = 3;
  cfg.sweep.layers = {1, 3};
  cfg.sweep.h_values = {1, 5, 12};
  cfg.sweep.r_values = {10, 40, 500};
  return cfg;
}

std::map<std::size_t, scaling::ScaledNetwork> scaled_for(const pipeline::RunConfig& cfg) {
  const auto model = nn::make_mlp(cfg.model.widths, 1);
  std::map<std::size_t, scaling::ScaledNetwork> out;
  for (const std::size_t l : cfg.sweep.layers) {
    scaling::ScalingOptions o;
    o.seed = l;
    out.emplace(l, scaling::insert_scaling(model, l, o));
  }
  return out;
}

}  // namespace

TEST_CASE("doubles print with 17 significant digits and round trip") {
  CHECK(analysis::format_double(0.1) == "0.10000000000000001");
  CHECK(analysis::format_double(-0.0) == "0");
  CHECK(analysis::format_double(1.0) == "1");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 40 - 20);
    CHECK(std::strtod(analysis::format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("spectrum csv of identity dynamics") {
  std::mt19937_64 rng(2);
  std::vector<RealMatrix> constant;
  for (int j = 0; j < 3; ++j) constant.push_back(testing::random_matrix(2, 1, rng).replicate(1, 4));
  const auto dmd = koopman::fit_dmd(koopman::hankelize(constant, 1));
  const auto rows = lines(analysis::spectrum_csv(dmd));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "re,im,modulus");
  // the fitted values sit within rounding of (1, 0, 1)
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double re = 0, im = 0, mod = 0;
    REQUIRE(std::sscanf(rows[i].c_str(), "%lf,%lf,%lf", &re, &im, &mod) == 3);
    CHECK(re == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(im) <= 1e-12);
    CHECK(mod == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rsv csv lists every position of every vector") {
  RealMatrix y(1, 30);
  for (int t = 0; t < 30; ++t) y(0, t) = std::sin(0.4 * t);
  const std::vector<RealMatrix> trajs{y};
  const auto emb = koopman::hankelize(trajs, 5);
  const auto rows = lines(analysis::rsv_csv(emb, 2));
  CHECK(rows[0] == "vector_index,position,value,sigma");
  CHECK(rows.size() == 1 + 2 * 26);
  CHECK(rows[1].rfind("0,0,", 0) == 0);
  CHECK(rows.back().rfind("1,25,", 0) == 0);
}

TEST_CASE("boundary csv covers the grid") {
  const analysis::Classifier constant = [](const RealMatrix& x) { return std::vector<int>(x.cols(), 1); };
  const auto rows = lines(analysis::boundary_csv(constant, 500));
  REQUIRE(rows.size() == 250001);
  CHECK(rows[0] == "x,y,class");
  CHECK(rows[1] == "0,0,1");
  CHECK(rows.back() == "1,1,1");
  for (std::size_t i = 1; i < rows.size(); i += 9973) CHECK(rows[i].back() == '1');

  const std::vector<Eigen::Index> widths{2, 8, 6, 4, 3, 2};
  const auto model = nn::make_mlp(widths, 3);
  const auto a = analysis::boundary_csv(analysis::classifier(model), 40);
  CHECK(a == analysis::boundary_csv(analysis::classifier(model), 40));
  const RealMatrix grid = data::decision_grid(40);
  const RealMatrix logits = nn::forward_batch(model, grid.transpose());
  const auto brows = lines(a);
  for (Eigen::Index i = 0; i < grid.rows(); i += 37) {
    Eigen::Index k = 0;
    logits.col(i).maxCoeff(&k);
    CHECK(brows[static_cast<std::size_t>(i) + 1].back() == static_cast<char>('0' + k));
  }
}

TEST_CASE("trajectory csv: 8 states x 12 steps with aligned ends") {
  const std::vector<Eigen::Index> widths{2, 8, 6, 4, 3, 2};
  const auto base = nn::make_mlp(widths, 4);
  scaling::ScalingOptions o;
  o.noise = 0.0;  // exact identity g layers: the scaled end equals the original end
  const auto batch = koopman::collect_trajectories(scaling::insert_scaling(base, 1, o), data::generate_yinyang(3, 1), 3);
  REQUIRE(batch.d1 == 8);
  const auto rows = lines(analysis::trajectory_csv(batch, 1));
  CHECK(rows[0] == "state_index,step,value,network");
  CHECK(rows.size() == 1 + 8 * 2 + 8 * 12);
  // original rows come first: steps 0 and 11 per state
  std::map<std::pair<int, int>, std::string> original, scaled_rows;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    int s = 0, t = 0;
    char value[64], net[16];
    REQUIRE(std::sscanf(rows[i].c_str(), "%d,%d,%63[^,],%15s", &s, &t, value, net) == 4);
    (std::string(net) == "original" ? original : scaled_rows)[{s, t}] = value;
  }
  CHECK(original.size() == 16);
  CHECK(scaled_rows.size() == 96);
  for (int s = 0; s < 8; ++s) {
    CHECK(original[{s, 0}] == scaled_rows[{s, 0}]);
    CHECK(original[{s, 11}] == scaled_rows[{s, 11}]);
  }
  // sentinel rows end at -1
  CHECK(scaled_rows[{6, 11}] == "-1");
  CHECK(scaled_rows[{7, 11}] == "-1");
  CHECK_THROWS(analysis::trajectory_csv(batch, 3));
}

TEST_CASE("sweep records skipped cells and resumes from its ledger") {
  const auto dir = testing::temp_dir("sweep");
  const auto cfg = tiny_config(dir);
  const auto scaled = scaled_for(cfg);
  const auto train = data::generate_yinyang(100, 1);
  const auto test = data::generate_yinyang(200, 2);
  const auto ledger = analysis::ledger_path(cfg);

  const auto first = analysis::run_sweep(cfg, scaled, train, test, ledger);
  REQUIRE(first.cells.size() == 2 * 3 * 3);
  int skipped = 0;
  for (const auto& c : first.cells) {
    const bool infeasible = c.h > 10 || c.r > 100;
    CHECK((c.status == "skipped") == infeasible);
    CHECK(c.accuracy.has_value() == !infeasible);
    skipped += infeasible;
  }
  CHECK(first.evaluated == 18 - skipped);
  CHECK(lines(testing::slurp(ledger)).size() == 18);

  // rerun: zero evaluations, identical table
  const auto second = analysis::run_sweep(cfg, scaled, train, test, ledger);
  CHECK(second.evaluated == 0);
  CHECK(second.reused == 18);
  CHECK(analysis::sweep_csv(second) == analysis::sweep_csv(first));
  CHECK(analysis::sweep_json(second, cfg) == analysis::sweep_json(first, cfg));

  // a torn trailing line only costs that one cell
  std::string text = testing::slurp(ledger);
  const auto rows = lines(text);
  text.clear();
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) text += rows[i] + '\n';
  text += rows.back().substr(0, rows.back().size() / 2);
  pipeline::write_text(ledger, text + '\n');
  const auto third = analysis::run_sweep(cfg, scaled, train, test, ledger);
  CHECK(third.cells.size() == 18);
  CHECK(third.reused == 17);
  CHECK(third.evaluated == 0);  // the torn cell was a skipped one
  CHECK(analysis::sweep_csv(third) == analysis::sweep_csv(first));

  // another seed does not reuse these cells
  auto other = cfg;
  other.seed = 4;
  CHECK(analysis::run_sweep(other, scaled, train, test, ledger).reused == 0);

  const auto csv = lines(analysis::sweep_csv(first));
  CHECK(csv[0] == "layer,h,r,accuracy,status");
  CHECK(csv[3] == "1,12,10,,skipped");
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep needs a scaled network per layer") {
  const auto cfg = tiny_config(testing::temp_dir("sweep2"));
  std::map<std::size_t, scaling::ScaledNetwork> none;
  CHECK_THROWS_AS(analysis::run_sweep(cfg, none, data::generate_yinyang(10, 1), data::generate_yinyang(10, 2),
                                      analysis::ledger_path(cfg)),
                  std::invalid_argument);
  std::filesystem::remove_all(cfg.out);
}
