#pragma once

#include <vector>

#include "odlm/mat.hpp"

namespace odlm::linalg {

/// Thin SVD a = u * diag(sigma) * v^T with r = min(rows, cols).
/// Columns of u and v are orthonormal; sigma is sorted non-increasing.
/// Equal singular values keep their sweep order; the largest-magnitude entry
/// of each left singular vector is forced nonnegative.
struct SvdResult {
    Mat u;                       // rows x r
    std::vector<double> sigma;   // length r, descending
    Mat v;                       // cols x r
};

/// Cholesky factor L with L*L^T = c, strictly positive diagonal.
/// Throws NotPositiveDefinite when a pivot is not positive; callers are
/// expected to add damping and retry.
Mat cholesky_lower(const Mat& c);

/// One-sided Jacobi SVD (QR-preconditioned for tall inputs).
/// Throws ConvergenceFailure if the sweep budget is exhausted.
SvdResult svd_full(const Mat& a);

/// Solves l * Y = b for lower-triangular l by forward substitution.
/// Throws SingularTriangular on a zero diagonal entry.
Mat solve_lower_triangular(const Mat& l, const Mat& b);

/// argmin_U || t - U*d ||_F, computed as t*d^T*(d*d^T + ridge*I)^{-1}.
/// Throws SingularNormalEquations when the normal matrix cannot be factored;
/// callers retry with a larger ridge.
Mat least_squares_left(const Mat& t, const Mat& d, double ridge);

/// sqrt(sum of squared entries) == sqrt(trace(a^T a)).
double frob_norm(const Mat& a);

}  // namespace odlm::linalg
