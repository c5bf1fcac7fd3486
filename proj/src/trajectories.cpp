#include <stdexcept>

#include "koopnet/koopman.hpp"

namespace koopnet::koopman {

RealMatrix TrajectoryBatch::concatenated() const {
  RealMatrix out(d1, static_cast<Eigen::Index>(per_sample.size()) * snapshots_per_sample());
  for (std::size_t j = 0; j < per_sample.size(); ++j) {
    out.middleCols(static_cast<Eigen::Index>(j) * snapshots_per_sample(), snapshots_per_sample()) = per_sample[j];
  }
  return out;
}

TrajectoryBatch TrajectoryBatch::head(std::size_t r) const {
  if (r > per_sample.size()) {
    throw std::out_of_range("trajectory batch: asked for " + std::to_string(r) + " of " +
                            std::to_string(per_sample.size()) + " samples");
  }
  TrajectoryBatch out = *this;
  out.per_sample.resize(r);
  out.original.resize(std::min(r, original.size()));
  return out;
}

RealMatrix augment(const RealMatrix& x, Eigen::Index d1, double sentinel) {
  if (x.rows() > d1) {
    throw std::invalid_argument("augment: " + std::to_string(x.rows()) + " rows exceed the state dimension " +
                                std::to_string(d1));
  }
  RealMatrix out(d1, x.cols());
  out.topRows(x.rows()) = x;
  out.bottomRows(d1 - x.rows()).setConstant(sentinel);
  return out;
}

TrajectoryBatch collect_trajectories(const scaling::ScaledNetwork& scaled, const data::LabeledDataset& data,
                                     std::size_t r, double sentinel) {
  scaled.validate();
  if (r < 1) throw std::invalid_argument("collect_trajectories: r must be >= 1");
  if (static_cast<Eigen::Index>(r) > data.size()) {
    throw std::invalid_argument("collect_trajectories: r = " + std::to_string(r) + " exceeds the " +
                                std::to_string(data.size()) + " available samples");
  }
  TrajectoryBatch batch;
  batch.d1 = scaled.state_dim();
  batch.d2 = scaled.target_output_dim();
  if (batch.d2 > batch.d1) {
    throw std::invalid_argument("collect_trajectories: target layer widens " + std::to_string(batch.d1) + " -> " +
                                std::to_string(batch.d2) + "; only d2 <= d1 is supported");
  }
  batch.k = scaled.k();
  batch.sentinel = sentinel;

  const RealMatrix x = data.inputs.topRows(static_cast<Eigen::Index>(r)).transpose();
  std::vector<RealMatrix> snaps;
  snaps.push_back(nn::apply_layers(scaled.prefix(), x));
  for (const auto& g : scaled.g_layers) {
    snaps.push_back(nn::apply_layers(std::span<const nn::DenseLayer>(&g, 1), snaps.back()));
  }
  const std::span<const nn::DenseLayer> target(&scaled.target(), 1);
  const RealMatrix out = augment(nn::apply_layers(target, snaps.back()), batch.d1, sentinel);
  const RealMatrix base_out = augment(nn::apply_layers(target, snaps.front()), batch.d1, sentinel);

  batch.per_sample.reserve(r);
  batch.original.reserve(r);
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(r); ++j) {
    RealMatrix d(batch.d1, batch.snapshots_per_sample());
    for (int s = 0; s <= batch.k; ++s) d.col(s) = snaps[static_cast<std::size_t>(s)].col(j);
    d.col(batch.k + 1) = out.col(j);
    batch.per_sample.push_back(std::move(d));
    RealMatrix o(batch.d1, 2);
    o.col(0) = snaps.front().col(j);
    o.col(1) = base_out.col(j);
    batch.original.push_back(std::move(o));
  }
  return batch;
}

RealMatrix HankelEmbedding::stacked() const {
  RealMatrix out(lifted_dim(), total_windows());
  Eigen::Index c = 0;
  for (const RealMatrix& b : blocks) {
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

Eigen::Index HankelEmbedding::total_windows() const {
  Eigen::Index n = 0;
  for (const RealMatrix& b : blocks) n += b.cols();
  return n;
}

Eigen::Index HankelEmbedding::total_pairs() const {
  Eigen::Index n = 0;
  for (const RealMatrix& b : blocks) n += b.cols() - 1;
  return n;
}

HankelEmbedding hankelize(std::span<const RealMatrix> trajectories, int h) {
  if (trajectories.empty()) throw std::invalid_argument("hankelize: no trajectories");
  if (h < 1) throw std::invalid_argument("hankelize: h must be >= 1");
  HankelEmbedding emb;
  emb.h = h;
  emb.d1 = trajectories.front().rows();
  emb.blocks.reserve(trajectories.size());
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    const RealMatrix& t = trajectories[j];
    if (t.rows() != emb.d1) throw std::invalid_argument("hankelize: trajectories disagree on the state dimension");
    if (t.cols() < h + 1) {
      throw std::invalid_argument("hankelize: h = " + std::to_string(h) + " needs at least " + std::to_string(h + 1) +
                                  " snapshots per sample, sample " + std::to_string(j) + " has " +
                                  std::to_string(t.cols()) + " (max feasible h is " +
                                  std::to_string(t.cols() - 1) + ")");
    }
    const Eigen::Index w = t.cols() - h + 1;
    RealMatrix block(h * emb.d1, w);
    for (Eigen::Index c = 0; c < w; ++c) {
      for (int s = 0; s < h; ++s) block.col(c).segment(s * emb.d1, emb.d1) = t.col(c + s);
    }
    emb.blocks.push_back(std::move(block));
  }
  return emb;
}

HankelEmbedding hankelize(const TrajectoryBatch& batch, int h) {
  if (h < 1 || h > batch.k + 1) {
    throw std::invalid_argument("hankelize: h = " + std::to_string(h) + " is infeasible with k = " +
                                std::to_string(batch.k) + " scaling layers (max feasible h is " +
                                std::to_string(batch.k + 1) + ")");
  }
  return hankelize(std::span<const RealMatrix>(batch.per_sample), h);
}

}  // namespace koopnet::koopman
