#pragma once

// Config-driven stages shared by the CLI, the acceptance harness and the
// Python bindings. Every random draw comes from the master seed through
// derive_seed, so a config plus a seed pins every artifact.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopnet/datasets.hpp"
#include "koopnet/hybrid.hpp"
#include "koopnet/koopman.hpp"
#include "koopnet/nn.hpp"
#include "koopnet/scaling.hpp"

namespace koopnet::pipeline {

inline constexpr int kSchemaVersion = 1;

/// Raised for malformed configs: unknown keys, wrong types, bad values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DatasetSpec {
  std::string name = "yinyang";  // yinyang | mnist
  std::size_t train_samples = 2000;  // yinyang only
  std::size_t test_samples = 1000;   // yinyang only
  std::string cache_dir;             // mnist; empty: default_cache_dir()
};

struct ModelSpec {
  std::vector<Eigen::Index> widths{2, 8, 6, 4, 3, 2};
  bool relu_output = false;
  int restarts = 1;  // best final training loss wins
  nn::TrainConfig train;
};

struct ScalingSpec {
  int k = 10;
  scaling::GInit init = scaling::GInit::NearIdentity;
  double noise = 1e-2;
  nn::TrainConfig train;
  std::map<std::size_t, nn::TrainConfig> per_layer;  // overrides train

  const nn::TrainConfig& train_for(std::size_t layer) const;
};

struct DmdSpec {
  int h = 10;
  std::size_t r = 1000;
  koopman::RankPolicy rank;
  bool clamp_relu = false;
};

struct SweepSpec {
  std::vector<std::size_t> layers{1, 2, 3};
  std::vector<int> h_values{1, 2, 5, 10};
  std::vector<std::size_t> r_values{10, 50, 500};
};

struct ExportSpec {
  std::size_t resolution = 200;
  Eigen::Index rsv_top = 5;
  std::size_t sample_index = 0;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 42;
  std::string out = "runs/default";
  std::size_t layer = 1;
  DatasetSpec dataset;
  ModelSpec model;
  ScalingSpec scaling;
  DmdSpec dmd;
  SweepSpec sweep;
  ExportSpec exports;

  void validate() const;
};

/// Defaults matching the reference experiments.
RunConfig yinyang_defaults();
RunConfig mnist_defaults();

/// Starts from the defaults of dataset.name and applies every key present.
/// Unknown keys anywhere raise ConfigError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

nlohmann::json train_config_to_json(const nn::TrainConfig& cfg);
nn::TrainConfig train_config_from_json(const nlohmann::json& j, nn::TrainConfig base = {});

// ---------------------------------------------------------------------------
// Stages

struct Datasets {
  data::LabeledDataset train;
  data::LabeledDataset test;
};

/// Generates Yin-Yang from the seed or loads (fetching if needed) MNIST.
Datasets load_datasets(const RunConfig& cfg);

struct BaselineResult {
  nn::MlpModel model;
  nn::TrainReport report;
  std::vector<double> restart_losses;  // final training loss per restart
  int chosen = 0;
};

BaselineResult train_baseline(const RunConfig& cfg, const data::LabeledDataset& train);

struct ScaleResult {
  scaling::ScaledNetwork scaled;
  scaling::DistillReport report;
};

ScaleResult scale_layer(const RunConfig& cfg, const nn::MlpModel& model, std::size_t layer,
                        const data::LabeledDataset& train, const data::LabeledDataset* eval = nullptr);

/// Seeded subset of the training set whose trajectories feed the DMD fits;
/// the first r rows for any r are a prefix of the same permutation, so fits
/// at different r are nested.
data::LabeledDataset trajectory_samples(const RunConfig& cfg, const data::LabeledDataset& train, std::size_t r);

koopman::DmdModel fit_layer(const RunConfig& cfg, const scaling::ScaledNetwork& scaled,
                            const data::LabeledDataset& train, int h, std::size_t r);

/// Artifact naming inside cfg.out.
std::filesystem::path model_path(const RunConfig& cfg);
std::filesystem::path scaled_path(const RunConfig& cfg, std::size_t layer);
std::filesystem::path dmd_path(const RunConfig& cfg, std::size_t layer, int h, std::size_t r);
std::filesystem::path hybrid_path(const RunConfig& cfg, std::size_t layer, int h, std::size_t r);

/// Writes text atomically (temp file + rename).
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace koopnet::pipeline
