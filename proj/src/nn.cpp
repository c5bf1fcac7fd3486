#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "koopnet/nn.hpp"
#include "nn_internal.hpp"

namespace koopnet::nn {

void MlpModel::validate() const {
  if (layers.empty()) throw std::invalid_argument("MlpModel: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.weight.rows() < 1 || l.weight.cols() < 1) {
      throw std::invalid_argument("MlpModel: layer " + std::to_string(i) + " has an empty weight matrix");
    }
    if (l.bias.size() != l.weight.rows()) {
      throw std::invalid_argument("MlpModel: layer " + std::to_string(i) + " bias length " +
                                  std::to_string(l.bias.size()) + " != weight rows " +
                                  std::to_string(l.weight.rows()));
    }
    if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
      throw std::invalid_argument("MlpModel: layer " + std::to_string(i - 1) + " outputs " +
                                  std::to_string(layers[i - 1].out_dim()) + " but layer " + std::to_string(i) +
                                  " expects " + std::to_string(l.in_dim()));
    }
  }
}

DenseLayer make_layer(Eigen::Index in, Eigen::Index out, bool relu, std::mt19937_64& rng) {
  if (in < 1 || out < 1) throw std::invalid_argument("make_layer: dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer;
  layer.weight.resize(out, in);
  // row-major draw order, matching the serialized layout
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
  }
  layer.bias.resize(out);
  for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = dist(rng);
  layer.relu = relu;
  return layer;
}

MlpModel make_mlp(std::span<const Eigen::Index> widths, std::uint64_t seed, bool relu_output) {
  if (widths.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output widths");
  std::mt19937_64 rng(seed);
  MlpModel model;
  model.seed = seed;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    model.layers.push_back(make_layer(widths[i], widths[i + 1], last ? relu_output : true, rng));
  }
  return model;
}

ForwardResult forward(const MlpModel& model, const RealVector& x) {
  model.validate();
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(model.input_dim()));
  }
  ForwardResult out;
  RealVector a = x;
  for (const DenseLayer& l : model.layers) {
    RealVector z = l.weight * a + l.bias;
    if (l.relu) z = z.cwiseMax(0.0);
    out.activations.push_back(z);
    a = std::move(z);
  }
  out.logits = std::move(a);
  return out;
}

RealMatrix apply_layers(std::span<const DenseLayer> layers, RealMatrix x) {
  for (const DenseLayer& l : layers) {
    if (x.rows() != l.in_dim()) {
      throw std::invalid_argument("apply_layers: batch has " + std::to_string(x.rows()) +
                                  " rows, layer expects " + std::to_string(l.in_dim()));
    }
    RealMatrix z = l.weight * x;
    z.colwise() += l.bias;
    if (l.relu) z = z.cwiseMax(0.0);
    x = std::move(z);
  }
  return x;
}

RealMatrix forward_batch(const MlpModel& model, const RealMatrix& x) {
  model.validate();
  return apply_layers(model.layers, x);
}

double huber_loss(const RealVector& pred, const RealVector& target, double delta) {
  if (pred.size() != target.size()) throw std::invalid_argument("huber_loss: length mismatch");
  if (!(delta > 0.0)) throw std::invalid_argument("huber_loss: delta must be positive");
  if (pred.size() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = std::abs(pred(i) - target(i));
    total += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
  }
  return total / static_cast<double>(pred.size());
}

double cross_entropy_loss(const RealVector& logits, int label) {
  if (label < 0 || label >= logits.size()) throw std::invalid_argument("cross_entropy_loss: label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(label);
}

namespace detail {

double batch_loss(const MlpModel& model, const RealMatrix& x, const Targets& targets,
                  std::span<const Eigen::Index> columns, const Loss& loss, Gradients* grads, std::int64_t* correct) {
  const std::size_t n_layers = model.layers.size();
  const auto batch = static_cast<Eigen::Index>(columns.size());
  if (batch == 0) throw std::invalid_argument("batch_loss: empty batch");

  std::vector<RealMatrix> acts;
  acts.reserve(n_layers + 1);
  RealMatrix a0(x.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) a0.col(j) = x.col(columns[static_cast<std::size_t>(j)]);
  acts.push_back(std::move(a0));
  for (const DenseLayer& l : model.layers) {
    RealMatrix z = l.weight * acts.back();
    z.colwise() += l.bias;
    if (l.relu) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  const RealMatrix& out = acts.back();

  RealMatrix delta(out.rows(), batch);
  double total = 0.0;
  if (std::holds_alternative<CrossEntropy>(loss)) {
    const auto* labels = std::get_if<std::span<const int>>(&targets);
    if (labels == nullptr) throw std::invalid_argument("cross-entropy needs class labels");
    for (Eigen::Index j = 0; j < batch; ++j) {
      const int y = (*labels)[static_cast<std::size_t>(columns[static_cast<std::size_t>(j)])];
      const auto col = out.col(j);
      Eigen::Index best = 0;
      const double m = col.maxCoeff(&best);
      if (correct != nullptr && best == y) ++*correct;
      const RealVector e = (col.array() - m).exp().matrix();
      const double s = e.sum();
      total += m + std::log(s) - col(y);
      delta.col(j) = e / s;
      delta(y, j) -= 1.0;
    }
    total /= static_cast<double>(batch);
    delta /= static_cast<double>(batch);
  } else {
    const double d = std::get<Huber>(loss).delta;
    const auto* const* target = std::get_if<const RealMatrix*>(&targets);
    if (target == nullptr) throw std::invalid_argument("huber loss needs regression targets");
    const double count = static_cast<double>(out.rows() * batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
      const auto t = (*target)->col(columns[static_cast<std::size_t>(j)]);
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double r = out(i, j) - t(i);
        const double ar = std::abs(r);
        if (ar <= d) {
          total += 0.5 * r * r;
          delta(i, j) = r;
        } else {
          total += d * (ar - 0.5 * d);
          delta(i, j) = std::copysign(d, r);
        }
      }
    }
    total /= count;
    delta /= count;
  }

  if (grads == nullptr) return total;

  std::size_t first_trainable = n_layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (model.layers[l].trainable) {
      first_trainable = l;
      break;
    }
  }
  grads->weight.assign(n_layers, RealMatrix());
  grads->bias.assign(n_layers, RealVector());
  for (std::size_t l = n_layers; l-- > first_trainable;) {
    const DenseLayer& layer = model.layers[l];
    if (layer.relu) delta.array() *= (acts[l + 1].array() > 0.0).cast<double>();
    if (layer.trainable) {
      grads->weight[l].noalias() = delta * acts[l].transpose();
      grads->bias[l] = delta.rowwise().sum();
    }
    if (l > first_trainable) delta = layer.weight.transpose() * delta;
  }
  return total;
}

}  // namespace detail

double loss_and_gradients(const MlpModel& model, const RealMatrix& x, const Targets& targets,
                          std::span<const Eigen::Index> columns, const Loss& loss, Gradients& grads) {
  return detail::batch_loss(model, x, targets, columns, loss, &grads, nullptr);
}

double grad_check(const MlpModel& model, const RealVector& x, const std::variant<int, RealVector>& target,
                  const Loss& loss, double step, double floor) {
  MlpModel probe = model;
  for (DenseLayer& l : probe.layers) l.trainable = true;
  probe.validate();

  RealMatrix xs = x;
  std::vector<int> label_store;
  RealMatrix target_store;
  Targets targets;
  if (std::holds_alternative<int>(target)) {
    label_store.push_back(std::get<int>(target));
    targets = std::span<const int>(label_store);
  } else {
    target_store = std::get<RealVector>(target);
    targets = &target_store;
  }
  const std::array<Eigen::Index, 1> cols{0};

  Gradients analytic;
  detail::batch_loss(probe, xs, targets, cols, loss, &analytic, nullptr);

  double worst = 0.0;
  auto check = [&](double& param, double grad) {
    const double saved = param;
    param = saved + step;
    const double up = detail::batch_loss(probe, xs, targets, cols, loss, nullptr, nullptr);
    param = saved - step;
    const double down = detail::batch_loss(probe, xs, targets, cols, loss, nullptr, nullptr);
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(grad - numeric) / std::max(std::abs(grad) + std::abs(numeric), floor);
    worst = std::max(worst, err);
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    DenseLayer& layer = probe.layers[l];
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) check(layer.weight(r, c), analytic.weight[l](r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) check(layer.bias(r), analytic.bias[l](r));
  }
  return worst;
}

}  // namespace koopnet::nn
