#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "koopnet/linalg.hpp"

namespace koopnet::data {

/// Row-per-sample feature matrix with integer class labels.
struct LabeledDataset {
  RealMatrix inputs;  // n_samples x n_features
  std::vector<int> labels;
  int n_classes = 0;
  std::string name;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index features() const { return inputs.cols(); }

  /// Throws std::invalid_argument when labels and rows disagree or a label
  /// falls outside [0, n_classes).
  void validate() const;

  /// Samples as columns (features x n), the layout the network code consumes.
  RealMatrix columns() const { return inputs.transpose(); }

  LabeledDataset head(Eigen::Index n) const;
  LabeledDataset subset(std::span<const Eigen::Index> rows) const;
};

// ---------------------------------------------------------------------------
// Yin-Yang (two-class variant, dots left empty)

inline constexpr int kYin = 0;
inline constexpr int kYang = 1;

struct YinYangGeometry {
  double r_big = 0.5;
  double r_small = 0.1;
};

/// Class of a point, or nullopt when the point lies outside the big circle or
/// inside one of the two dots.
std::optional<int> yinyang_class(double x, double y, const YinYangGeometry& geometry = {});

/// n points on [0,1]^2 via rejection sampling; the goal class alternates so
/// |n_yin - n_yang| <= 1.
LabeledDataset generate_yinyang(std::size_t n, std::uint64_t seed);

/// resolution^2 points tiling [0,1]^2 row-major (x varies fastest).
RealMatrix decision_grid(std::size_t resolution);

// ---------------------------------------------------------------------------
// IDX container

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
};

/// Parses unsigned-byte IDX data. Throws FormatError on a wrong magic number
/// or a payload shorter or longer than the header announces.
IdxArray parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Pixels divided by 255; labels 0..9.
LabeledDataset mnist_from_idx(const IdxArray& images, const IdxArray& labels, std::string name);

/// Inverse of mnist_from_idx (pixels rounded back to bytes).
IdxArray mnist_images_to_idx(const LabeledDataset& dataset);
IdxArray mnist_labels_to_idx(const LabeledDataset& dataset);

struct MnistSplits {
  LabeledDataset train;
  LabeledDataset test;
};

/// Reads the four canonical files from dir.
MnistSplits load_mnist(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Fetch-and-cache client

class FetchError : public std::runtime_error {
 public:
  FetchError(const std::string& message, int attempts)
      : std::runtime_error(message), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

struct RemoteFile {
  std::string name;
  std::string sha256;  // of the uncompressed payload
};

/// The four MNIST files with pinned digests.
const std::array<RemoteFile, 4>& mnist_files();

/// $KOOPNET_CACHE_DIR, else $XDG_CACHE_HOME/koopnet, else ~/.cache/koopnet.
std::filesystem::path default_cache_dir();

struct FetchOptions {
  std::string base_url;  // empty: $KOOPNET_MNIST_URL or the default mirror
  int retries = 3;
  std::chrono::milliseconds backoff{200};
  std::vector<RemoteFile> files;  // empty: mnist_files()
};

std::string default_mnist_url();

/// Ensures <cache_dir>/mnist holds every file with a matching digest,
/// downloading "<base_url>/<name>" (or "<name>.gz") when missing. Returns the
/// mnist directory.
std::filesystem::path ensure_mnist(const std::filesystem::path& cache_dir, const FetchOptions& options = {});

std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Inflates gzip or zlib data.
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);

}  // namespace koopnet::data
