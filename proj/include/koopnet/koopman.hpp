#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "koopnet/datasets.hpp"
#include "koopnet/linalg.hpp"
#include "koopnet/scaling.hpp"

namespace koopnet::koopman {

inline constexpr double kSentinel = -1.0;

/// One d1 x (k+2) snapshot matrix per sample: column 0 is the prefix output,
/// columns 1..k the g-layer outputs, column k+1 the target output padded
/// with sentinel rows up to d1.
struct TrajectoryBatch {
  Eigen::Index d1 = 0;
  Eigen::Index d2 = 0;
  int k = 0;
  double sentinel = kSentinel;
  std::vector<RealMatrix> per_sample;
  /// Same samples through the unscaled network: d1 x 2 (prefix output,
  /// padded base target output).
  std::vector<RealMatrix> original;

  Eigen::Index augment_count() const { return d1 - d2; }
  Eigen::Index snapshots_per_sample() const { return k + 2; }
  std::size_t size() const { return per_sample.size(); }
  /// [D_0 D_1 ... D_{r-1}], d1 x (k+2)r.
  RealMatrix concatenated() const;
  /// First r samples.
  TrajectoryBatch head(std::size_t r) const;
};

/// Runs the first r samples of data through the scaled network.
TrajectoryBatch collect_trajectories(const scaling::ScaledNetwork& scaled, const data::LabeledDataset& data,
                                     std::size_t r, double sentinel = kSentinel);

/// Pads a d2 x n block with sentinel rows to d1 x n.
RealMatrix augment(const RealMatrix& x, Eigen::Index d1, double sentinel = kSentinel);

/// Per-sample sliding windows: block c of a sample stacks snapshots
/// c .. c+h-1, so a sample with T snapshots yields T-h+1 columns.
struct HankelEmbedding {
  int h = 1;
  Eigen::Index d1 = 0;
  std::vector<RealMatrix> blocks;  // h*d1 x w_j

  Eigen::Index lifted_dim() const { return h * d1; }
  /// All blocks side by side.
  RealMatrix stacked() const;
  Eigen::Index total_windows() const;
  Eigen::Index total_pairs() const;
};

/// Works on arbitrary trajectories (each d1 x T_j); needs T_j >= h+1 for
/// every sample so each contributes at least one pair.
HankelEmbedding hankelize(std::span<const RealMatrix> trajectories, int h);
/// Same for a batch; the largest feasible h is k+1.
HankelEmbedding hankelize(const TrajectoryBatch& batch, int h);

struct RankPolicy {
  enum class Kind { Energy, Fixed };
  Kind kind = Kind::Energy;
  double energy = 0.999999;
  Eigen::Index fixed = 0;
  double drop = 1e-10;  // sigma_i < drop * sigma_max never kept

  static RankPolicy Energy(double tau = 0.999999) { return {Kind::Energy, tau, 0, 1e-10}; }
  static RankPolicy Fixed(Eigen::Index p) { return {Kind::Fixed, 0.999999, p, 1e-10}; }
};

/// Exact DMD of the lifted snapshot pairs.
struct DmdModel {
  int h = 1;
  Eigen::Index d1 = 0;
  Eigen::Index rank = 0;
  ComplexVector eigenvalues;     // p, descending modulus
  ComplexMatrix modes;           // h*d1 x p, exact modes X' V S^-1 W
  ComplexMatrix amplitude_map;   // p x h*d1, pseudoinverse of modes
  RealVector singular_values;    // every singular value of X
  Eigen::Index pairs = 0;
  double residual = 0.0;         // mean ||predicted - true|| of the last block over training pairs
  double max_residual = 0.0;

  Eigen::Index lifted_dim() const { return h * d1; }
};

/// Throws std::invalid_argument on an all-zero X or an empty embedding.
DmdModel fit_dmd(const HankelEmbedding& emb, const RankPolicy& rank = {});

/// xi = modes^+ window.
ComplexVector amplitudes(const DmdModel& model, const RealVector& window);

/// Real part of the last d1 block of modes * Lambda * xi. Throws when the
/// imaginary part exceeds 1e-6 times the prediction norm.
RealVector predict_step(const DmdModel& model, const RealVector& window);

/// Real d1 x h*d1 matrix B with predict_step(w) == B w.
RealMatrix one_step_operator(const DmdModel& model);

/// Historical formulation: D' = D C with C a companion matrix whose last
/// column solves a least-squares problem.
struct CompanionModel {
  RealVector c;               // last column
  ComplexVector eigenvalues;  // of the companion matrix, descending modulus

  RealMatrix companion() const;
};

/// Uses the single sample of emb (throws when there are several or fewer
/// than 2 windows).
CompanionModel fit_companion(const HankelEmbedding& emb);

struct SpectrumPoint {
  double re = 0.0;
  double im = 0.0;
  double modulus = 0.0;
};

std::vector<SpectrumPoint> spectrum(const DmdModel& model);

/// Top right singular vectors of the stacked Hankel matrix, one per row.
struct RsvCurves {
  RealMatrix vectors;  // top x columns
  RealVector sigma;    // top
};

RsvCurves rsv_curves(const HankelEmbedding& emb, Eigen::Index top);

// {h, d1, rank, eigenvalues: [[re, im]...], modes: {rows, cols, re, im},
//  residual, max_residual, pairs, singular_values, amplitude_map: {...}}
nlohmann::json to_json(const DmdModel& model);
DmdModel dmd_from_json(const nlohmann::json& j);
void save_dmd(const DmdModel& model, const std::filesystem::path& path);
DmdModel load_dmd(const std::filesystem::path& path);

nlohmann::json complex_matrix_to_json(const ComplexMatrix& m);
ComplexMatrix complex_matrix_from_json(const nlohmann::json& j);

}  // namespace koopnet::koopman
