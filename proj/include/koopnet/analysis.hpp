#pragma once

// CSV/JSON data products for the plotting scripts and the (h, r) sweep.
// CSV dialect: comma separated, '\n' endings, %.17g floats, header first.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopnet/hybrid.hpp"
#include "koopnet/koopman.hpp"
#include "koopnet/nn.hpp"
#include "koopnet/pipeline.hpp"
#include "koopnet/scaling.hpp"

namespace koopnet::analysis {

/// %.17g, with -0 written as 0 so equal values give equal bytes.
std::string format_double(double v);

/// re,im,modulus; one row per eigenvalue in spectrum() order.
std::string spectrum_csv(const koopman::DmdModel& model);
void export_spectrum(const koopman::DmdModel& model, const std::filesystem::path& path);

/// vector_index,position,value,sigma
std::string rsv_csv(const koopman::HankelEmbedding& emb, Eigen::Index top);
void export_rsv(const koopman::HankelEmbedding& emb, Eigen::Index top, const std::filesystem::path& path);

/// Maps a batch of points (2 x n, columns) to class indices.
using Classifier = std::function<std::vector<int>(const RealMatrix&)>;
Classifier classifier(const nn::MlpModel& model);
Classifier classifier(const hybrid::HybridModel& model);

/// x,y,class over decision_grid(resolution), resolution^2 rows.
std::string boundary_csv(const Classifier& classify, std::size_t resolution);
void export_boundary(const Classifier& classify, std::size_t resolution, const std::filesystem::path& path);

/// state_index,step,value,network. "original" rows hold steps 0 and k+1 (the
/// unscaled network), "scaled" rows steps 0..k+1.
std::string trajectory_csv(const koopman::TrajectoryBatch& batch, std::size_t sample_index);
void export_trajectory(const koopman::TrajectoryBatch& batch, std::size_t sample_index,
                       const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sweep

struct SweepCell {
  std::size_t layer = 0;
  int h = 0;
  std::size_t r = 0;
  std::optional<double> accuracy;  // empty when skipped
  std::string status;              // "ok" | "skipped"
  std::string reason;              // why a cell was skipped
};

struct SweepResult {
  std::vector<SweepCell> cells;  // layer, then r, then h order
  int evaluated = 0;             // cells computed in this call
  int reused = 0;                // cells taken from the ledger
};

/// Progress hook, called after every cell (fresh or reused).
using SweepCallback = std::function<void(const SweepCell&, bool fresh)>;

/// Fits and evaluates one hybrid per (layer, h, r) cell of cfg.sweep on the
/// test split. Cells already present in the ledger (same seed) are reused;
/// every fresh cell is appended to the ledger as one JSON line
/// {layer, h, r, accuracy, wall_ms, status, seed}. Infeasible cells (h > k,
/// h < 1, r outside the training set) are recorded as skipped.
SweepResult run_sweep(const pipeline::RunConfig& cfg, const std::map<std::size_t, scaling::ScaledNetwork>& scaled,
                      const data::LabeledDataset& train, const data::LabeledDataset& test,
                      const std::filesystem::path& ledger, const SweepCallback& progress = {});

std::filesystem::path ledger_path(const pipeline::RunConfig& cfg);

/// layer,h,r,accuracy,status (accuracy empty for skipped cells).
std::string sweep_csv(const SweepResult& result);
/// {seed, dataset, cells: [{layer, h, r, accuracy|null, status, reason?}]}
nlohmann::json sweep_json(const SweepResult& result, const pipeline::RunConfig& cfg);

}  // namespace koopnet::analysis
