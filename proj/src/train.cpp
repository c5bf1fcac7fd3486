#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "koopnet/nn.hpp"
#include "koopnet/seed.hpp"
#include "nn_internal.hpp"

namespace koopnet::nn {

double PlateauTracker::observe(double loss) {
  if (loss < best_ * (1.0 - config_.threshold)) {
    best_ = loss;
    bad_epochs_ = 0;
    return 1.0;
  }
  if (++bad_epochs_ >= config_.patience) {
    bad_epochs_ = 0;
    return config_.factor;
  }
  return 1.0;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: betas must lie in (0, 1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (const auto* h = std::get_if<Huber>(&loss); h != nullptr && !(h->delta > 0.0)) {
    throw std::invalid_argument("TrainConfig: huber delta must be positive");
  }
  if (scheduler && (!(scheduler->factor > 0.0 && scheduler->factor < 1.0) || scheduler->patience < 1)) {
    throw std::invalid_argument("TrainConfig: scheduler needs factor in (0,1) and patience >= 1");
  }
}

NonFiniteLossError::NonFiniteLossError(int epoch, double value)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "non-finite training loss (" << value << ") at epoch " << epoch;
        return os.str();
      }()),
      epoch_(epoch) {}

void adamw_step(MlpModel& model, const Gradients& grads, AdamWState& state, const TrainConfig& cfg, double lr) {
  const std::size_t n = model.layers.size();
  if (state.m_weight.size() != n) {
    state.m_weight.assign(n, RealMatrix());
    state.v_weight.assign(n, RealMatrix());
    state.m_bias.assign(n, RealVector());
    state.v_bias.assign(n, RealVector());
    for (std::size_t l = 0; l < n; ++l) {
      const DenseLayer& layer = model.layers[l];
      if (!layer.trainable) continue;
      state.m_weight[l] = RealMatrix::Zero(layer.weight.rows(), layer.weight.cols());
      state.v_weight[l] = RealMatrix::Zero(layer.weight.rows(), layer.weight.cols());
      state.m_bias[l] = RealVector::Zero(layer.bias.size());
      state.v_bias[l] = RealVector::Zero(layer.bias.size());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double step_size = lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    param *= 1.0 - lr * cfg.weight_decay;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_bc2 + cfg.eps);
  };
  for (std::size_t l = 0; l < n; ++l) {
    DenseLayer& layer = model.layers[l];
    if (!layer.trainable) continue;
    update(layer.weight, grads.weight[l], state.m_weight[l], state.v_weight[l]);
    update(layer.bias, grads.bias[l], state.m_bias[l], state.v_bias[l]);
  }
}

TrainReport fit(MlpModel& model, const RealMatrix& x, const Targets& targets, const TrainConfig& cfg,
                const EpochCallback& on_epoch) {
  cfg.validate();
  model.validate();
  if (x.rows() != model.input_dim()) {
    throw std::invalid_argument("fit: inputs have " + std::to_string(x.rows()) + " features, model expects " +
                                std::to_string(model.input_dim()));
  }
  const bool any_trainable =
      std::any_of(model.layers.begin(), model.layers.end(), [](const DenseLayer& l) { return l.trainable; });
  if (!any_trainable) throw std::invalid_argument("fit: model has no trainable layers");

  const Eigen::Index n = x.cols();
  if (n < 1) throw std::invalid_argument("fit: no samples");
  const bool classification = std::holds_alternative<std::span<const int>>(targets);
  if (classification) {
    if (static_cast<Eigen::Index>(std::get<std::span<const int>>(targets).size()) != n) {
      throw std::invalid_argument("fit: label count differs from sample count");
    }
  } else {
    const RealMatrix* t = std::get<const RealMatrix*>(targets);
    if (t->cols() != n || t->rows() != model.output_dim()) {
      throw std::invalid_argument("fit: regression targets are " + shape_string(t->rows(), t->cols()) +
                                  ", expected " + shape_string(model.output_dim(), n));
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  AdamWState state;
  Gradients grads;
  std::optional<PlateauTracker> plateau;
  if (cfg.scheduler) plateau.emplace(*cfg.scheduler);
  double lr = cfg.lr;
  TrainReport report;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0;
    std::int64_t correct = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min(cfg.batch_size, n - start);
      const std::span<const Eigen::Index> cols(order.data() + start, static_cast<std::size_t>(len));
      const double loss = detail::batch_loss(model, x, targets, cols, cfg.loss, &grads,
                                             classification ? &correct : nullptr);
      if (!std::isfinite(loss)) throw NonFiniteLossError(epoch, loss);
      total += loss * static_cast<double>(len);
      adamw_step(model, grads, state, cfg, lr);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = total / static_cast<double>(n);
    stats.accuracy = classification ? static_cast<double>(correct) / static_cast<double>(n)
                                    : std::numeric_limits<double>::quiet_NaN();
    stats.lr = lr;
    report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (plateau) lr *= plateau->observe(stats.loss);
  }
  return report;
}

TrainReport train(MlpModel& model, const data::LabeledDataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  data.validate();
  if (!std::holds_alternative<CrossEntropy>(cfg.loss)) {
    throw std::invalid_argument("train: classification training uses the cross-entropy loss");
  }
  if (model.output_dim() < data.n_classes) {
    throw std::invalid_argument("train: model has fewer outputs than the dataset has classes");
  }
  const RealMatrix x = data.columns();
  return fit(model, x, std::span<const int>(data.labels), cfg, on_epoch);
}

double accuracy(const MlpModel& model, const data::LabeledDataset& data) {
  data.validate();
  const RealMatrix out = forward_batch(model, data.columns());
  std::int64_t hits = 0;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    Eigen::Index best = 0;
    out.col(j).maxCoeff(&best);
    if (best == data.labels[static_cast<std::size_t>(j)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(out.cols());
}

}  // namespace koopnet::nn
