#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "koopnet/linalg.hpp"

namespace koopnet::linalg {

namespace {

void require_finite(const RealMatrix& a, const char* what) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw LinalgError(std::string(what) + ": empty matrix " + shape_string(a.rows(), a.cols()));
  }
  if (!a.allFinite()) {
    throw LinalgError(std::string(what) + ": non-finite entries in " + shape_string(a.rows(), a.cols()));
  }
}

// Rotates columns p and q of m so that they become orthogonal.
inline void rotate(double* xp, double* xq, Eigen::Index len, double c, double s) {
  for (Eigen::Index i = 0; i < len; ++i) {
    const double a = xp[i];
    const double b = xq[i];
    xp[i] = c * a - s * b;
    xq[i] = s * a + c * b;
  }
}

// One-sided Jacobi on the columns of w (m >= n); v accumulates the rotations.
int jacobi_orthogonalize(RealMatrix& w, RealMatrix& v, const SvdOptions& options) {
  const Eigen::Index m = w.rows();
  const Eigen::Index n = w.cols();
  constexpr double kTiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  std::vector<double> norms(static_cast<std::size_t>(n));

  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < n; ++j) norms[j] = w.col(j).squaredNorm();
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = norms[p];
        const double beta = norms[q];
        if (alpha <= kTiny || beta <= kTiny) continue;
        const double gamma = w.col(p).dot(w.col(q));
        if (std::abs(gamma) <= options.tolerance * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(w.col(p).data(), w.col(q).data(), m, c, s);
        rotate(v.col(p).data(), v.col(q).data(), n, c, s);
        norms[p] = alpha - t * gamma;
        norms[q] = beta + t * gamma;
      }
    }
    if (!rotated) return sweep;
  }
  throw LinalgError("thin_svd: Jacobi sweeps did not converge for " + shape_string(m, n) +
                    " after " + std::to_string(options.max_sweeps) + " sweeps");
}

// Square (or tall) core: m >= n.
SvdResult svd_tall(const RealMatrix& a, const SvdOptions& options) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();

  RealMatrix q;
  RealMatrix w;
  const bool reduced = m > n;
  if (reduced) {
    w = householder_qr(a, q);
  } else {
    w = a;
  }
  RealMatrix v = RealMatrix::Identity(n, n);
  const int sweeps = jacobi_orthogonalize(w, v, options);

  RealVector norms(n);
  for (Eigen::Index j = 0; j < n; ++j) norms(j) = w.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return norms(x) > norms(y); });

  const Eigen::Index wr = w.rows();
  SvdResult out;
  out.sweeps = sweeps;
  out.sigma.resize(n);
  RealMatrix u_small(wr, n);
  out.vt.resize(n, n);
  const double sigma_max = norms(order.front());
  const double cutoff = sigma_max * static_cast<double>(std::max(m, n)) *
                        std::numeric_limits<double>::epsilon();
  std::vector<bool> have(static_cast<std::size_t>(n), false);
  std::vector<Eigen::Index> missing;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index j = order[static_cast<std::size_t>(k)];
    out.sigma(k) = norms(j);
    out.vt.row(k) = v.col(j).transpose();
    if (norms(j) > cutoff) {
      u_small.col(k) = w.col(j) / norms(j);
      have[static_cast<std::size_t>(k)] = true;
    } else {
      missing.push_back(k);
    }
  }

  // Complete U with an orthonormal basis for the numerically null part: the
  // trailing columns of a full QR of the kept columns span their complement.
  if (!missing.empty()) {
    RealMatrix kept(wr, n - static_cast<Eigen::Index>(missing.size()));
    Eigen::Index c = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (have[static_cast<std::size_t>(k)]) kept.col(c++) = u_small.col(k);
    }
    RealMatrix full = RealMatrix::Identity(wr, wr);
    if (kept.cols() > 0) full = Eigen::HouseholderQR<RealMatrix>(kept).householderQ() * full;
    Eigen::Index next = kept.cols();
    for (const Eigen::Index k : missing) {
      if (next >= wr) throw LinalgError("thin_svd: failed to complete left basis for " + shape_string(m, n));
      u_small.col(k) = full.col(next++);
    }
  }

  out.u = reduced ? RealMatrix(q * u_small) : u_small;
  return out;
}

}  // namespace

SvdResult thin_svd(const RealMatrix& a, const SvdOptions& options) {
  require_finite(a, "thin_svd");
  if (a.rows() >= a.cols()) return svd_tall(a, options);
  SvdResult t = svd_tall(a.transpose(), options);
  SvdResult out;
  out.sweeps = t.sweeps;
  out.sigma = std::move(t.sigma);
  out.u = t.vt.transpose();
  out.vt = t.u.transpose();
  return out;
}

RealMatrix householder_qr(const RealMatrix& a, RealMatrix& q) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (m < n) throw LinalgError("householder_qr: expected a tall matrix, got " + shape_string(m, n));
  RealMatrix work = a;
  std::vector<RealVector> reflectors;
  reflectors.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    RealVector x = work.col(j).tail(m - j);
    const double xnorm = x.norm();
    if (xnorm == 0.0) {
      reflectors.emplace_back(RealVector::Zero(m - j));
      continue;
    }
    x(0) += std::copysign(xnorm, x(0));
    x.normalize();
    auto block = work.bottomRightCorner(m - j, n - j);
    const Eigen::RowVectorXd proj = x.transpose() * block;
    block.noalias() -= 2.0 * x * proj;
    reflectors.push_back(std::move(x));
  }
  RealMatrix r = work.topRows(n).triangularView<Eigen::Upper>();

  q = RealMatrix::Identity(m, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const RealVector& x = reflectors[static_cast<std::size_t>(j)];
    if (x.squaredNorm() == 0.0) continue;
    auto block = q.bottomRightCorner(m - j, n - j);
    const Eigen::RowVectorXd proj = x.transpose() * block;
    block.noalias() -= 2.0 * x * proj;
  }
  return r;
}

}  // namespace koopnet::linalg
