#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "koopnet/datasets.hpp"
#include "koopnet/koopman.hpp"
#include "koopnet/nn.hpp"
#include "koopnet/scaling.hpp"

namespace koopnet::hybrid {

/// prefix -> g layers -> last h snapshots -> one DMD step -> first d2 rows
/// -> suffix. The target layer's weights are not part of the model.
struct HybridModel {
  std::vector<nn::DenseLayer> prefix;
  std::vector<nn::DenseLayer> g_layers;
  std::vector<nn::DenseLayer> suffix;
  koopman::DmdModel dmd;
  std::size_t target_index = 0;
  Eigen::Index d2 = 0;
  bool clamp_relu = false;
  RealMatrix step;  // one_step_operator(dmd), cached

  int h() const { return dmd.h; }
  int k() const { return static_cast<int>(g_layers.size()); }
  Eigen::Index d1() const { return dmd.d1; }
  Eigen::Index input_dim() const;

  void validate() const;
};

/// Throws std::invalid_argument when h > k or the DMD state dimension differs
/// from the target layer's input width.
HybridModel build_hybrid(const scaling::ScaledNetwork& scaled, const koopman::DmdModel& dmd, bool clamp_relu = false);

RealVector hybrid_forward(const HybridModel& model, const RealVector& x);
/// Batch version, samples as columns.
RealMatrix hybrid_forward_batch(const HybridModel& model, const RealMatrix& x);
/// Activation handed to the suffix, d2 x n (for inspection and tests).
RealMatrix replaced_activation(const HybridModel& model, const RealMatrix& x);

struct EvalReport {
  double accuracy = 0.0;
  Eigen::Index samples = 0;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
};

/// Argmax of each logit column against labels.
EvalReport score(const RealMatrix& logits, std::span<const int> labels, int n_classes);

EvalReport evaluate(const nn::MlpModel& model, const data::LabeledDataset& data);
EvalReport evaluate(const scaling::ScaledNetwork& scaled, const data::LabeledDataset& data);
EvalReport evaluate(const HybridModel& model, const data::LabeledDataset& data);

nlohmann::json to_json(const EvalReport& report);

// {format_version, kind: "hybrid", target_index, h, d2, clamp_relu,
//  prefix, g_layers, suffix, dmd}
nlohmann::json to_json(const HybridModel& model);
HybridModel hybrid_from_json(const nlohmann::json& j);
void save_hybrid(const HybridModel& model, const std::filesystem::path& path);
HybridModel load_hybrid(const std::filesystem::path& path);

}  // namespace koopnet::hybrid
