#include "skillab/oracle/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace skillab::oracle {

Svd jacobi_svd(const Tensor& a, double tol, int max_sweeps) {
  if (a.rows() < a.cols()) {
    Svd t = jacobi_svd(a.transpose(), tol, max_sweeps);
    return {t.v, t.s, t.u};
  }
  const std::size_t m = a.rows(), n = a.cols();
  Tensor w = a;
  Tensor v = Tensor::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += w(i, p) * w(i, p);
          beta += w(i, q) * w(i, q);
          gamma += w(i, p) * w(i, q);
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  Svd out{Tensor({m, n}), std::vector<double>(n), Tensor({n, n})};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.s[k] = norms[j];
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = norms[j] > 0.0 ? w(i, j) / norms[j] : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
  }
  return out;
}

Tensor lu_solve(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw numkit::DimensionError("lu_solve: A must be square and match B");
  Tensor lu = a;
  Tensor x = b;
  double scale = 0.0;
  for (double e : a.data()) scale = std::max(scale, std::abs(e));
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (std::abs(lu(piv, k)) <= 1e-14 * std::max(scale, 1e-300))
      throw SingularSystemError("lu_solve: matrix is singular to working precision");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      for (std::size_t j = 0; j < x.cols(); ++j) std::swap(x(k, j), x(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double s = x(k, j);
      for (std::size_t i = k + 1; i < n; ++i) s -= lu(k, i) * x(i, j);
      x(k, j) = s / lu(k, k);
    }
  }
  return x;
}

Tensor lstsq(const Tensor& a, const Tensor& b, double rcond) {
  if (a.rows() != b.rows()) throw numkit::DimensionError("lstsq: row mismatch");
  const Svd d = jacobi_svd(a);
  const double cutoff = rcond * (d.s.empty() ? 0.0 : d.s.front());
  // x = V diag(1/s) U^T b
  const Tensor utb = numkit::matmul(d.u.transpose(), b);
  Tensor scaled = utb;
  for (std::size_t k = 0; k < d.s.size(); ++k)
    for (std::size_t j = 0; j < b.cols(); ++j) scaled(k, j) = d.s[k] > cutoff ? utb(k, j) / d.s[k] : 0.0;
  return numkit::matmul(d.v, scaled);
}

}  // namespace skillab::oracle
