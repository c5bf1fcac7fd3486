#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "koopnet/linalg.hpp"

namespace koopnet {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

namespace linalg {

RealMatrix pinv(const RealMatrix& a, double rcond) {
  if (!(rcond > 0.0)) throw LinalgError("pinv: rcond must be positive");
  const SvdResult s = thin_svd(a);
  const double cutoff = rcond * s.sigma(0);
  RealVector inv_sigma = RealVector::Zero(s.sigma.size());
  for (Eigen::Index k = 0; k < s.sigma.size(); ++k) {
    if (s.sigma(k) > cutoff && s.sigma(k) > 0.0) inv_sigma(k) = 1.0 / s.sigma(k);
  }
  return s.vt.transpose() * inv_sigma.asDiagonal() * s.u.transpose();
}

ComplexMatrix pinv(const ComplexMatrix& a, double rcond) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  RealMatrix embedded(2 * m, 2 * n);
  embedded.topLeftCorner(m, n) = a.real();
  embedded.topRightCorner(m, n) = -a.imag();
  embedded.bottomLeftCorner(m, n) = a.imag();
  embedded.bottomRightCorner(m, n) = a.real();
  const RealMatrix p = pinv(embedded, rcond);
  ComplexMatrix out(n, m);
  out.real() = p.topLeftCorner(n, m);
  out.imag() = p.bottomLeftCorner(n, m);
  return out;
}

RealMatrix lstsq(const RealMatrix& a, const RealMatrix& b) {
  if (a.rows() != b.rows()) {
    throw LinalgError("lstsq: row mismatch, A is " + shape_string(a.rows(), a.cols()) + ", B is " +
                      shape_string(b.rows(), b.cols()));
  }
  const double rcond =
      static_cast<double>(std::max(a.rows(), a.cols())) * std::numeric_limits<double>::epsilon();
  return pinv(a, rcond) * b;
}

ComplexMatrix inverse(const ComplexMatrix& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || n < 1) {
    throw LinalgError("inverse: expected a non-empty square matrix, got " + shape_string(a.rows(), a.cols()));
  }
  using RowMajor = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor lu = a;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[i] = i;
  const double scale = a.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    double best = std::abs(lu(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > best) {
        best = std::abs(lu(i, k));
        pivot = i;
      }
    }
    if (best <= scale * std::numeric_limits<double>::epsilon() * static_cast<double>(n)) {
      throw LinalgError("inverse: matrix is numerically singular (" + shape_string(n, n) + ")");
    }
    if (pivot != k) {
      lu.row(k).swap(lu.row(pivot));
      std::swap(perm[k], perm[pivot]);
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      lu(i, k) /= lu(k, k);
      const Complex f = lu(i, k);
      if (f != Complex(0.0)) lu.row(i).tail(n - k - 1) -= f * lu.row(k).tail(n - k - 1);
    }
  }
  RowMajor rhs = RowMajor::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) rhs(i, perm[i]) = 1.0;
  // forward (unit lower), then backward (upper)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < i; ++k) rhs.row(i) -= lu(i, k) * rhs.row(k);
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index k = i + 1; k < n; ++k) rhs.row(i) -= lu(i, k) * rhs.row(k);
    rhs.row(i) /= lu(i, i);
  }
  return rhs;
}

}  // namespace linalg
}  // namespace koopnet
