#pragma once

// Shared helpers for the unit tests and the acceptance harness.

#include <algorithm>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopnet/linalg.hpp"

namespace koopnet::testing {

inline RealMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  RealMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline RealMatrix random_low_rank(Eigen::Index rows, Eigen::Index cols, Eigen::Index rank, std::mt19937_64& rng) {
  return random_matrix(rows, rank, rng) * random_matrix(rank, cols, rng);
}

/// Random real matrix with spectral radius `radius`, built from a random
/// eigenbasis and eigenvalues (real ones and conjugate pairs) on a disk.
inline RealMatrix random_stable_system(Eigen::Index n, std::mt19937_64& rng, double radius = 0.95) {
  std::uniform_real_distribution<double> u(0.3, 1.0);
  std::uniform_real_distribution<double> angle(0.2, 2.9);
  RealMatrix block = RealMatrix::Zero(n, n);
  Eigen::Index i = 0;
  while (i < n) {
    if (i + 1 < n && u(rng) > 0.6) {
      const double r = radius * u(rng);
      const double a = angle(rng);
      block(i, i) = r * std::cos(a);
      block(i, i + 1) = -r * std::sin(a);
      block(i + 1, i) = r * std::sin(a);
      block(i + 1, i + 1) = r * std::cos(a);
      i += 2;
    } else {
      block(i, i) = radius * u(rng) * (u(rng) > 0.65 ? -1.0 : 1.0);
      i += 1;
    }
  }
  RealMatrix basis = random_matrix(n, n, rng);
  basis += 2.0 * RealMatrix::Identity(n, n);  // keeps the basis well conditioned
  return basis * block * basis.inverse();
}

/// Largest distance between two spectra after greedy nearest matching.
inline double spectrum_distance(const ComplexVector& a, const ComplexVector& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<bool> used(static_cast<std::size_t>(b.size()), false);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = -1;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double d = std::abs(a(i) - b(j));
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    used[static_cast<std::size_t>(arg)] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

/// Every non-real eigenvalue has its conjugate in the set (to tol, relative).
inline bool conjugate_closed(const ComplexVector& v, double tol) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double scale = std::max(1.0, std::abs(v(i)));
    if (std::abs(v(i).imag()) <= tol * scale) continue;
    bool found = false;
    for (Eigen::Index j = 0; j < v.size() && !found; ++j) {
      found = j != i && std::abs(v(j) - std::conj(v(i))) <= tol * scale;
    }
    if (!found) return false;
  }
  return true;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto dir = std::filesystem::temp_directory_path() /
                   ("koopnet_" + tag + "_" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::filesystem::path source_dir() {
  if (const char* s = std::getenv("KOOPNET_SOURCE_DIR")) return s;
  return std::filesystem::current_path();
}

}  // namespace koopnet::testing
