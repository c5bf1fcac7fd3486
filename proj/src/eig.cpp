#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "koopnet/linalg.hpp"

// Real nonsymmetric eigenproblem: orthogonal Hessenberg reduction followed by
// Francis double-shift QR to real Schur form, then back-substitution for the
// eigenvectors of the quasi-triangular factor. The structure follows the
// classic EISPACK orthes/hqr2 pair.

namespace koopnet::linalg {

namespace {

struct SchurWork {
  Eigen::Index n = 0;
  RealMatrix h;  // Hessenberg, then quasi-triangular
  RealMatrix v;  // accumulated similarity
  std::vector<double> d;
  std::vector<double> e;
};

void reduce_to_hessenberg(SchurWork& w) {
  const Eigen::Index n = w.n;
  const Eigen::Index high = n - 1;
  std::vector<double> ort(static_cast<std::size_t>(n), 0.0);
  RealMatrix& h = w.h;
  RealMatrix& v = w.v;

  for (Eigen::Index m = 1; m <= high - 1; ++m) {
    double scale = 0.0;
    for (Eigen::Index i = m; i <= high; ++i) scale += std::abs(h(i, m - 1));
    if (scale == 0.0) continue;

    double hh = 0.0;
    for (Eigen::Index i = high; i >= m; --i) {
      ort[i] = h(i, m - 1) / scale;
      hh += ort[i] * ort[i];
    }
    double g = std::sqrt(hh);
    if (ort[m] > 0) g = -g;
    hh -= ort[m] * g;
    ort[m] -= g;

    for (Eigen::Index j = m; j < n; ++j) {
      double f = 0.0;
      for (Eigen::Index i = high; i >= m; --i) f += ort[i] * h(i, j);
      f /= hh;
      for (Eigen::Index i = m; i <= high; ++i) h(i, j) -= f * ort[i];
    }
    for (Eigen::Index i = 0; i <= high; ++i) {
      double f = 0.0;
      for (Eigen::Index j = high; j >= m; --j) f += ort[j] * h(i, j);
      f /= hh;
      for (Eigen::Index j = m; j <= high; ++j) h(i, j) -= f * ort[j];
    }
    ort[m] *= scale;
    h(m, m - 1) = scale * g;
  }

  v.setIdentity(n, n);
  for (Eigen::Index m = high - 1; m >= 1; --m) {
    if (h(m, m - 1) == 0.0) continue;
    for (Eigen::Index i = m + 1; i <= high; ++i) ort[i] = h(i, m - 1);
    for (Eigen::Index j = m; j <= high; ++j) {
      double g = 0.0;
      for (Eigen::Index i = m; i <= high; ++i) g += ort[i] * v(i, j);
      g = (g / ort[m]) / h(m, m - 1);
      for (Eigen::Index i = m; i <= high; ++i) v(i, j) += g * ort[i];
    }
  }
}

// Complex division (xr + i xi) / (yr + i yi).
inline void cdiv(double xr, double xi, double yr, double yi, double& out_r, double& out_i) {
  if (std::abs(yr) > std::abs(yi)) {
    const double r = yi / yr;
    const double d = yr + r * yi;
    out_r = (xr + r * xi) / d;
    out_i = (xi - r * xr) / d;
  } else {
    const double r = yr / yi;
    const double d = yi + r * yr;
    out_r = (r * xr + xi) / d;
    out_i = (r * xi - xr) / d;
  }
}

void schur_and_vectors(SchurWork& w, int iteration_cap, bool want_vectors) {
  const Eigen::Index nn = w.n;
  Eigen::Index n = nn - 1;
  const Eigen::Index low = 0;
  const Eigen::Index high = nn - 1;
  const double eps = std::numeric_limits<double>::epsilon();
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, t, ww, x, y;
  RealMatrix& h = w.h;
  RealMatrix& v = w.v;
  auto& d = w.d;
  auto& e = w.e;

  double norm = 0.0;
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(i - 1, 0); j < nn; ++j) norm += std::abs(h(i, j));
  }

  int total_iterations = 0;
  int iter = 0;
  while (n >= low) {
    Eigen::Index l = n;
    while (l > low) {
      s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
      if (s == 0.0) s = norm;
      if (std::abs(h(l, l - 1)) < eps * s) break;
      --l;
    }

    if (l == n) {
      // one root
      h(n, n) = h(n, n) + exshift;
      d[n] = h(n, n);
      e[n] = 0.0;
      --n;
      iter = 0;
    } else if (l == n - 1) {
      // two roots
      ww = h(n, n - 1) * h(n - 1, n);
      p = (h(n - 1, n - 1) - h(n, n)) / 2.0;
      q = p * p + ww;
      z = std::sqrt(std::abs(q));
      h(n, n) = h(n, n) + exshift;
      h(n - 1, n - 1) = h(n - 1, n - 1) + exshift;
      x = h(n, n);

      if (q >= 0) {
        z = (p >= 0) ? p + z : p - z;
        d[n - 1] = x + z;
        d[n] = d[n - 1];
        if (z != 0.0) d[n] = x - ww / z;
        e[n - 1] = 0.0;
        e[n] = 0.0;
        x = h(n, n - 1);
        s = std::abs(x) + std::abs(z);
        p = x / s;
        q = z / s;
        r = std::sqrt(p * p + q * q);
        p = p / r;
        q = q / r;
        for (Eigen::Index j = n - 1; j < nn; ++j) {
          z = h(n - 1, j);
          h(n - 1, j) = q * z + p * h(n, j);
          h(n, j) = q * h(n, j) - p * z;
        }
        for (Eigen::Index i = 0; i <= n; ++i) {
          z = h(i, n - 1);
          h(i, n - 1) = q * z + p * h(i, n);
          h(i, n) = q * h(i, n) - p * z;
        }
        for (Eigen::Index i = low; i <= high; ++i) {
          z = v(i, n - 1);
          v(i, n - 1) = q * z + p * v(i, n);
          v(i, n) = q * v(i, n) - p * z;
        }
      } else {
        d[n - 1] = x + p;
        d[n] = x + p;
        e[n - 1] = z;
        e[n] = -z;
      }
      n -= 2;
      iter = 0;
    } else {
      x = h(n, n);
      y = 0.0;
      ww = 0.0;
      if (l < n) {
        y = h(n - 1, n - 1);
        ww = h(n, n - 1) * h(n - 1, n);
      }

      // Wilkinson's original ad hoc shift
      if (iter == 10) {
        exshift += x;
        for (Eigen::Index i = low; i <= n; ++i) h(i, i) -= x;
        s = std::abs(h(n, n - 1)) + std::abs(h(n - 1, n - 2));
        x = y = 0.75 * s;
        ww = -0.4375 * s * s;
      }
      // MATLAB's new ad hoc shift
      if (iter == 30) {
        s = (y - x) / 2.0;
        s = s * s + ww;
        if (s > 0) {
          s = std::sqrt(s);
          if (y < x) s = -s;
          s = x - ww / ((y - x) / 2.0 + s);
          for (Eigen::Index i = low; i <= n; ++i) h(i, i) -= s;
          exshift += s;
          x = y = ww = 0.964;
        }
      }

      ++iter;
      if (++total_iterations > iteration_cap) {
        throw LinalgError("eig_general: QR iteration cap (" + std::to_string(iteration_cap) +
                          ") exceeded for " + shape_string(nn, nn));
      }

      Eigen::Index m = n - 2;
      while (m >= l) {
        z = h(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - ww) / h(m + 1, m) + h(m, m + 1);
        q = h(m + 1, m + 1) - z - r - s;
        r = h(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p = p / s;
        q = q / s;
        r = r / s;
        if (m == l) break;
        if (std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r)) <
            eps * (std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) + std::abs(h(m + 1, m + 1))))) {
          break;
        }
        --m;
      }

      for (Eigen::Index i = m + 2; i <= n; ++i) {
        h(i, i - 2) = 0.0;
        if (i > m + 2) h(i, i - 3) = 0.0;
      }

      // Double QR step on rows l:n and columns m:n
      for (Eigen::Index k = m; k <= n - 1; ++k) {
        const bool notlast = (k != n - 1);
        if (k != m) {
          p = h(k, k - 1);
          q = h(k + 1, k - 1);
          r = notlast ? h(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p = p / x;
          q = q / x;
          r = r / x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0) s = -s;
        if (s != 0) {
          if (k != m) {
            h(k, k - 1) = -s * x;
          } else if (l != m) {
            h(k, k - 1) = -h(k, k - 1);
          }
          p = p + s;
          x = p / s;
          y = q / s;
          z = r / s;
          q = q / p;
          r = r / p;

          for (Eigen::Index j = k; j < nn; ++j) {
            p = h(k, j) + q * h(k + 1, j);
            if (notlast) {
              p = p + r * h(k + 2, j);
              h(k + 2, j) = h(k + 2, j) - p * z;
            }
            h(k, j) = h(k, j) - p * x;
            h(k + 1, j) = h(k + 1, j) - p * y;
          }
          for (Eigen::Index i = 0; i <= std::min(n, k + 3); ++i) {
            p = x * h(i, k) + y * h(i, k + 1);
            if (notlast) {
              p = p + z * h(i, k + 2);
              h(i, k + 2) = h(i, k + 2) - p * r;
            }
            h(i, k) = h(i, k) - p;
            h(i, k + 1) = h(i, k + 1) - p * q;
          }
          for (Eigen::Index i = low; i <= high; ++i) {
            p = x * v(i, k) + y * v(i, k + 1);
            if (notlast) {
              p = p + z * v(i, k + 2);
              v(i, k + 2) = v(i, k + 2) - p * r;
            }
            v(i, k) = v(i, k) - p;
            v(i, k + 1) = v(i, k + 1) - p * q;
          }
        }
      }
    }
  }

  if (!want_vectors) return;

  // Back-substitute to find vectors of upper triangular form
  if (norm == 0.0) return;

  for (n = nn - 1; n >= 0; --n) {
    p = d[n];
    q = e[n];

    if (q == 0) {
      // real vector
      Eigen::Index l = n;
      h(n, n) = 1.0;
      for (Eigen::Index i = n - 1; i >= 0; --i) {
        ww = h(i, i) - p;
        r = 0.0;
        for (Eigen::Index j = l; j <= n; ++j) r = r + h(i, j) * h(j, n);
        if (e[i] < 0.0) {
          z = ww;
          s = r;
        } else {
          l = i;
          if (e[i] == 0.0) {
            if (ww != 0.0) {
              h(i, n) = -r / ww;
            } else {
              h(i, n) = -r / (eps * norm);
            }
          } else {
            x = h(i, i + 1);
            y = h(i + 1, i);
            q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
            t = (x * s - z * r) / q;
            h(i, n) = t;
            if (std::abs(x) > std::abs(z)) {
              h(i + 1, n) = (-r - ww * t) / x;
            } else {
              h(i + 1, n) = (-s - y * t) / z;
            }
          }
          // overflow control
          t = std::abs(h(i, n));
          if ((eps * t) * t > 1) {
            for (Eigen::Index j = i; j <= n; ++j) h(j, n) = h(j, n) / t;
          }
        }
      }
    } else if (q < 0) {
      // complex vector (uses columns n-1 and n)
      Eigen::Index l = n - 1;
      double cr, ci;
      if (std::abs(h(n, n - 1)) > std::abs(h(n - 1, n))) {
        h(n - 1, n - 1) = q / h(n, n - 1);
        h(n - 1, n) = -(h(n, n) - p) / h(n, n - 1);
      } else {
        cdiv(0.0, -h(n - 1, n), h(n - 1, n - 1) - p, q, cr, ci);
        h(n - 1, n - 1) = cr;
        h(n - 1, n) = ci;
      }
      h(n, n - 1) = 0.0;
      h(n, n) = 1.0;
      for (Eigen::Index i = n - 2; i >= 0; --i) {
        double ra = 0.0, sa = 0.0, vr, vi;
        for (Eigen::Index j = l; j <= n; ++j) {
          ra = ra + h(i, j) * h(j, n - 1);
          sa = sa + h(i, j) * h(j, n);
        }
        ww = h(i, i) - p;

        if (e[i] < 0.0) {
          z = ww;
          r = ra;
          s = sa;
        } else {
          l = i;
          if (e[i] == 0) {
            cdiv(-ra, -sa, ww, q, cr, ci);
            h(i, n - 1) = cr;
            h(i, n) = ci;
          } else {
            // solve complex equations
            x = h(i, i + 1);
            y = h(i + 1, i);
            vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
            vi = (d[i] - p) * 2.0 * q;
            if (vr == 0.0 && vi == 0.0) {
              vr = eps * norm * (std::abs(ww) + std::abs(q) + std::abs(x) + std::abs(y) + std::abs(z));
            }
            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi, cr, ci);
            h(i, n - 1) = cr;
            h(i, n) = ci;
            if (std::abs(x) > (std::abs(z) + std::abs(q))) {
              h(i + 1, n - 1) = (-ra - ww * h(i, n - 1) + q * h(i, n)) / x;
              h(i + 1, n) = (-sa - ww * h(i, n) - q * h(i, n - 1)) / x;
            } else {
              cdiv(-r - y * h(i, n - 1), -s - y * h(i, n), z, q, cr, ci);
              h(i + 1, n - 1) = cr;
              h(i + 1, n) = ci;
            }
          }

          // overflow control
          t = std::max(std::abs(h(i, n - 1)), std::abs(h(i, n)));
          if ((eps * t) * t > 1) {
            for (Eigen::Index j = i; j <= n; ++j) {
              h(j, n - 1) = h(j, n - 1) / t;
              h(j, n) = h(j, n) / t;
            }
          }
        }
      }
    }
  }

  // Back transformation to get eigenvectors of original matrix
  for (Eigen::Index j = nn - 1; j >= low; --j) {
    for (Eigen::Index i = low; i <= high; ++i) {
      z = 0.0;
      for (Eigen::Index k = low; k <= std::min(j, high); ++k) z = z + v(i, k) * h(k, j);
      v(i, j) = z;
    }
  }
}

SchurWork decompose(const RealMatrix& a, const EigOptions& options, bool want_vectors) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw LinalgError("eig_general: expected a non-empty square matrix, got " +
                      shape_string(a.rows(), a.cols()));
  }
  if (!a.allFinite()) {
    throw LinalgError("eig_general: non-finite entries in " + shape_string(a.rows(), a.cols()));
  }
  SchurWork w;
  w.n = a.rows();
  w.h = a;
  w.d.assign(static_cast<std::size_t>(w.n), 0.0);
  w.e.assign(static_cast<std::size_t>(w.n), 0.0);
  reduce_to_hessenberg(w);
  const int cap = std::max(1, options.iterations_per_value) * static_cast<int>(w.n);
  schur_and_vectors(w, cap, want_vectors);
  return w;
}

std::vector<Eigen::Index> spectral_order(const ComplexVector& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return spectral_before(values(x), values(y));
  });
  return order;
}

}  // namespace

bool spectral_before(const Complex& a, const Complex& b) {
  const double ma = std::abs(a);
  const double mb = std::abs(b);
  if (ma != mb) return ma > mb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

EigResult eig_general(const RealMatrix& a, const EigOptions& options) {
  SchurWork w = decompose(a, options, true);
  const Eigen::Index n = w.n;

  ComplexVector values(n);
  ComplexMatrix vectors(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    values(j) = Complex(w.d[j], w.e[j]);
    const double im = w.e[j];
    if (im == 0.0) {
      vectors.col(j) = w.v.col(j).cast<Complex>();
    } else if (im > 0.0) {
      // columns j, j+1 hold the real and imaginary parts of the pair
      for (Eigen::Index i = 0; i < n; ++i) {
        vectors(i, j) = Complex(w.v(i, j), w.v(i, j + 1));
        vectors(i, j + 1) = Complex(w.v(i, j), -w.v(i, j + 1));
      }
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double len = vectors.col(j).norm();
    if (len > 0.0) vectors.col(j) /= len;
  }

  const auto order = spectral_order(values);
  EigResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = values(order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

ComplexVector eigenvalues(const RealMatrix& a, const EigOptions& options) {
  SchurWork w = decompose(a, options, false);
  ComplexVector values(w.n);
  for (Eigen::Index j = 0; j < w.n; ++j) values(j) = Complex(w.d[j], w.e[j]);
  const auto order = spectral_order(values);
  ComplexVector out(w.n);
  for (Eigen::Index k = 0; k < w.n; ++k) out(k) = values(order[static_cast<std::size_t>(k)]);
  return out;
}

}  // namespace koopnet::linalg
