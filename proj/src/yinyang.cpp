#include <cmath>
#include <random>
#include <stdexcept>

#include "koopnet/datasets.hpp"

namespace koopnet::data {

void LabeledDataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
    throw std::invalid_argument("dataset '" + name + "': " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(inputs.rows()) + " rows");
  }
  for (const int y : labels) {
    if (y < 0 || y >= n_classes) {
      throw std::invalid_argument("dataset '" + name + "': label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(n_classes) + ")");
    }
  }
}

LabeledDataset LabeledDataset::head(Eigen::Index n) const {
  if (n < 0 || n > size()) {
    throw std::out_of_range("dataset '" + name + "': requested " + std::to_string(n) + " of " +
                            std::to_string(size()) + " samples");
  }
  LabeledDataset out;
  out.inputs = inputs.topRows(n);
  out.labels.assign(labels.begin(), labels.begin() + n);
  out.n_classes = n_classes;
  out.name = name;
  out.seed = seed;
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const Eigen::Index> rows) const {
  LabeledDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), features());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = rows[i];
    if (r < 0 || r >= size()) throw std::out_of_range("dataset '" + name + "': row index out of range");
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(r);
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
  }
  out.n_classes = n_classes;
  out.name = name;
  out.seed = seed;
  return out;
}

std::optional<int> yinyang_class(double x, double y, const YinYangGeometry& g) {
  const double cx = g.r_big;
  const double cy = g.r_big;
  if (std::hypot(x - cx, y - cy) > g.r_big) return std::nullopt;
  const double lobe = 0.5 * g.r_big;
  const double d_lower = std::hypot(x - cx, y - (cy - lobe));
  const double d_upper = std::hypot(x - cx, y - (cy + lobe));
  if (d_lower < g.r_small || d_upper < g.r_small) return std::nullopt;
  const bool yang = d_lower <= lobe || (x > cx && d_upper > lobe);
  return yang ? kYang : kYin;
}

LabeledDataset generate_yinyang(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_yinyang: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LabeledDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(n), 2);
  out.labels.reserve(n);
  out.n_classes = 2;
  out.name = "yinyang";
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const int goal = static_cast<int>(i % 2);
    for (;;) {
      const double x = unit(rng);
      const double y = unit(rng);
      const auto c = yinyang_class(x, y);
      if (!c || *c != goal) continue;
      out.inputs(static_cast<Eigen::Index>(i), 0) = x;
      out.inputs(static_cast<Eigen::Index>(i), 1) = y;
      out.labels.push_back(goal);
      break;
    }
  }
  return out;
}

RealMatrix decision_grid(std::size_t resolution) {
  if (resolution < 2) throw std::invalid_argument("decision_grid: resolution must be >= 2");
  const auto res = static_cast<Eigen::Index>(resolution);
  RealMatrix grid(res * res, 2);
  const auto last = static_cast<double>(res - 1);
  for (Eigen::Index iy = 0; iy < res; ++iy) {
    for (Eigen::Index ix = 0; ix < res; ++ix) {
      grid(iy * res + ix, 0) = static_cast<double>(ix) / last;
      grid(iy * res + ix, 1) = static_cast<double>(iy) / last;
    }
  }
  return grid;
}

}  // namespace koopnet::data
