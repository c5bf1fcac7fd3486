#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "koopnet/datasets.hpp"
#include "koopnet/nn.hpp"

namespace koopnet::scaling {

/// How the inserted layers start out.
enum class GInit {
  NearIdentity,      // I + N(0, noise^2) weights, N(0, noise^2) bias
  FrameworkDefault,  // U(-1/sqrt(d), 1/sqrt(d)), same as make_layer
};

struct ScalingOptions {
  int k = 10;
  GInit init = GInit::NearIdentity;
  double noise = 1e-2;
  std::uint64_t seed = 0;
};

/// A frozen base network with k square Linear+ReLU layers inserted directly
/// before layer target_index.
struct ScaledNetwork {
  nn::MlpModel base;
  std::size_t target_index = 0;
  std::vector<nn::DenseLayer> g_layers;

  int k() const { return static_cast<int>(g_layers.size()); }
  /// d1: input width of the target layer (and of every g layer).
  Eigen::Index state_dim() const { return base.layers[target_index].in_dim(); }
  /// d2: output width of the target layer.
  Eigen::Index target_output_dim() const { return base.layers[target_index].out_dim(); }

  std::span<const nn::DenseLayer> prefix() const;
  const nn::DenseLayer& target() const { return base.layers[target_index]; }
  std::span<const nn::DenseLayer> suffix() const;

  /// prefix, g layers, target, suffix as one plain model.
  nn::MlpModel flattened() const;

  void validate() const;
};

std::string to_string(GInit init);
GInit parse_ginit(const std::string& name);

/// Throws std::invalid_argument when target_index is out of range, names a
/// layer without ReLU, or k < 1.
ScaledNetwork insert_scaling(const nn::MlpModel& base, std::size_t target_index, const ScalingOptions& options = {});

struct DistillReport {
  nn::TrainReport training;
  double initial_loss = 0.0;
  double final_loss = 0.0;      // Huber over the whole distillation set
  double base_accuracy = 0.0;   // on eval data (training data when none given)
  double scaled_accuracy = 0.0;
};

/// Trains only the g layers so that target(G(prefix(x))) matches
/// target(prefix(x)) under the Huber loss in cfg (must be nn::Huber).
DistillReport distill(ScaledNetwork& scaled, const data::LabeledDataset& train, const nn::TrainConfig& cfg,
                      const data::LabeledDataset* eval = nullptr);

/// Huber distillation loss of the current g layers on data.
double distillation_loss(const ScaledNetwork& scaled, const data::LabeledDataset& data, double delta = 1.0);

/// The base network with the g layers removed.
nn::MlpModel ablate(const ScaledNetwork& scaled);

// {format_version, layers, seed, scaling: {target_index, k, g_layers}}
nlohmann::json to_json(const ScaledNetwork& scaled);
ScaledNetwork scaled_from_json(const nlohmann::json& j);
void save_scaled(const ScaledNetwork& scaled, const std::filesystem::path& path);
ScaledNetwork load_scaled(const std::filesystem::path& path);

}  // namespace koopnet::scaling
