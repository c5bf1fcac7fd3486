#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "koopnet/datasets.hpp"
#include "koopnet/linalg.hpp"

namespace koopnet::nn {

struct DenseLayer {
  RealMatrix weight;  // out x in
  RealVector bias;    // out
  bool relu = true;
  bool trainable = true;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct MlpModel {
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;

  Eigen::Index input_dim() const { return layers.front().in_dim(); }
  Eigen::Index output_dim() const { return layers.back().out_dim(); }

  /// Checks that consecutive layers chain and that weights/biases agree.
  void validate() const;
};

/// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
DenseLayer make_layer(Eigen::Index in, Eigen::Index out, bool relu, std::mt19937_64& rng);

/// widths = {input, hidden..., output}; every layer but the last applies ReLU
/// unless relu_output is set.
MlpModel make_mlp(std::span<const Eigen::Index> widths, std::uint64_t seed, bool relu_output = false);

struct ForwardResult {
  RealVector logits;
  std::vector<RealVector> activations;  // output of every layer, in order
};

ForwardResult forward(const MlpModel& model, const RealVector& x);

/// Applies layers to a batch stored as columns (features x n).
RealMatrix apply_layers(std::span<const DenseLayer> layers, RealMatrix x);
RealMatrix forward_batch(const MlpModel& model, const RealMatrix& x);

// ---------------------------------------------------------------------------
// Losses

struct CrossEntropy {};
struct Huber {
  double delta = 1.0;
};
using Loss = std::variant<CrossEntropy, Huber>;

/// Mean elementwise Huber loss.
double huber_loss(const RealVector& pred, const RealVector& target, double delta);
double cross_entropy_loss(const RealVector& logits, int label);

// ---------------------------------------------------------------------------
// Training

struct PlateauScheduler {
  double factor = 0.5;
  int patience = 2;
  double threshold = 1e-4;  // relative improvement required
};

/// ReduceLROnPlateau on the epoch-mean training loss.
class PlateauTracker {
 public:
  explicit PlateauTracker(PlateauScheduler config) : config_(config) {}
  /// Returns the factor to apply to the learning rate after this epoch.
  double observe(double loss);

 private:
  PlateauScheduler config_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

struct TrainConfig {
  int epochs = 1;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-2;
  double eps = 1e-8;
  Eigen::Index batch_size = 32;
  std::optional<PlateauScheduler> scheduler;
  Loss loss = CrossEntropy{};
  std::uint64_t seed = 0;  // shuffling

  void validate() const;
};

/// Per-parameter Adam moments, decay applied directly to the weights.
struct AdamWState {
  std::vector<RealMatrix> m_weight, v_weight;
  std::vector<RealVector> m_bias, v_bias;
  std::int64_t step = 0;
};

struct Gradients {
  std::vector<RealMatrix> weight;
  std::vector<RealVector> bias;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(int epoch, double value);
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // NaN for regression targets
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_loss() const { return epochs.empty() ? 0.0 : epochs.back().loss; }
};

/// Classification labels or regression targets (outputs x n).
using Targets = std::variant<std::span<const int>, const RealMatrix*>;

/// Mean loss of a batch and the gradients of every trainable parameter.
double loss_and_gradients(const MlpModel& model, const RealMatrix& x, const Targets& targets,
                          std::span<const Eigen::Index> columns, const Loss& loss, Gradients& grads);

void adamw_step(MlpModel& model, const Gradients& grads, AdamWState& state, const TrainConfig& cfg, double lr);

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch AdamW over samples stored as columns of x. Only layers with
/// trainable = true are modified.
TrainReport fit(MlpModel& model, const RealMatrix& x, const Targets& targets, const TrainConfig& cfg,
                const EpochCallback& on_epoch = {});

TrainReport train(MlpModel& model, const data::LabeledDataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

double accuracy(const MlpModel& model, const data::LabeledDataset& data);

/// Largest relative error between backprop and central differences over all
/// parameters, |a - n| / max(|a| + |n|, floor).
double grad_check(const MlpModel& model, const RealVector& x, const std::variant<int, RealVector>& target,
                  const Loss& loss, double step = 1e-5, double floor = 1e-6);

// ---------------------------------------------------------------------------
// Persistence: {format_version: 1, layers: [{rows, cols, relu, weight, bias}], seed}

nlohmann::json layers_to_json(std::span<const DenseLayer> layers);
std::vector<DenseLayer> layers_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& j);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace koopnet::nn
