#pragma once

// Dense real/complex kernels: thin SVD (one-sided Jacobi), general real
// eigendecomposition (Hessenberg + Francis QR), pseudoinverse, least squares.
// Eigen supplies storage and matrix products; the decompositions live here.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace koopnet {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Raised for shape mismatches and numerical failures (non-convergence).
class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_string(Eigen::Index rows, Eigen::Index cols);

namespace linalg {

struct SvdOptions {
  double tolerance = 1e-12;  // relative off-diagonal threshold per column pair
  int max_sweeps = 100;
};

/// A = U diag(sigma) Vt with p = min(m, n), sigma descending and >= 0.
struct SvdResult {
  RealMatrix u;      // m x p, orthonormal columns
  RealVector sigma;  // p
  RealMatrix vt;     // p x n, orthonormal rows
  int sweeps = 0;
};

SvdResult thin_svd(const RealMatrix& a, const SvdOptions& options = {});

struct EigOptions {
  int iterations_per_value = 30;  // cap is iterations_per_value * n QR steps
};

/// values[k] pairs with vectors.col(k); ordered by descending modulus,
/// then descending real part, then descending imaginary part.
struct EigResult {
  ComplexVector values;
  ComplexMatrix vectors;
};

EigResult eig_general(const RealMatrix& a, const EigOptions& options = {});

/// Eigenvalues only, same ordering as eig_general.
ComplexVector eigenvalues(const RealMatrix& a, const EigOptions& options = {});

/// Moore-Penrose pseudoinverse; singular values below rcond * sigma_max are
/// treated as zero.
RealMatrix pinv(const RealMatrix& a, double rcond = 1e-12);

/// Complex pseudoinverse through the real embedding [[Re, -Im], [Im, Re]],
/// which maps C^n isometrically onto R^{2n}.
ComplexMatrix pinv(const ComplexMatrix& a, double rcond = 1e-12);

/// X minimizing ||A X - B||_F (minimum-norm solution).
RealMatrix lstsq(const RealMatrix& a, const RealMatrix& b);

/// Inverse of a square complex matrix by LU with partial pivoting.
ComplexMatrix inverse(const ComplexMatrix& a);

/// Householder QR of a tall matrix (m >= n): returns the n x n factor R and
/// writes the thin orthonormal factor into q.
RealMatrix householder_qr(const RealMatrix& a, RealMatrix& q);

/// Strict ordering used for every spectrum in the project.
bool spectral_before(const Complex& a, const Complex& b);

}  // namespace linalg
}  // namespace koopnet
