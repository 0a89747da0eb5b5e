#pragma once

#include <vector>

#include "skillab/numkit/tensor.hpp"

namespace skillab::oracle {

using numkit::Tensor;

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thin SVD, A = U diag(s) V^T, singular values descending.
struct Svd {
  Tensor u;  // m x k
  std::vector<double> s;
  Tensor v;  // n x k
};

/// One-sided Jacobi (Hestenes) rotations until every column pair is orthogonal to `tol`.
Svd jacobi_svd(const Tensor& a, double tol = 1e-15, int max_sweeps = 200);

/// Solves A X = B by LU with partial pivoting.
Tensor lu_solve(const Tensor& a, const Tensor& b);

/// Minimum-norm least squares through the SVD pseudo-inverse; singular values below
/// rcond * s_max are treated as zero.
Tensor lstsq(const Tensor& a, const Tensor& b, double rcond = 1e-12);

}  // namespace skillab::oracle
