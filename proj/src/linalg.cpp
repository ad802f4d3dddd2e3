#include "odlm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace odlm::linalg {

namespace {

constexpr double kJacobiTol = 1e-13;     // relative off-diagonal threshold
constexpr int kJacobiMaxSweeps = 60;

// Householder QR of a (m x n, m >= n). Fills q_thin (m x n, orthonormal
// columns) and r (n x n upper triangular) with a = q_thin * r.
void householder_qr(const Mat& a, Mat& q_thin, Mat& r) {
    const int m = a.rows, n = a.cols;
    // column-major working copy
    std::vector<double> w(static_cast<size_t>(m) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) w[static_cast<size_t>(j) * m + i] = a(i, j);
    auto col = [&](int j) { return w.data() + static_cast<size_t>(j) * m; };

    std::vector<std::vector<double>> reflectors(n);  // v, length m-k; empty = identity
    std::vector<double> betas(n, 0.0);               // 2 / ||v||^2

    for (int k = 0; k < n; ++k) {
        double* ck = col(k);
        double norm2 = 0.0;
        for (int i = k; i < m; ++i) norm2 += ck[i] * ck[i];
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) continue;
        const double alpha = ck[k] > 0.0 ? -norm : norm;
        std::vector<double> v(m - k);
        v[0] = ck[k] - alpha;
        for (int i = k + 1; i < m; ++i) v[i - k] = ck[i];
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;
        // apply H = I - beta v v^T to columns k..n-1
        for (int j = k; j < n; ++j) {
            double* cj = col(j);
            double s = 0.0;
            for (int i = k; i < m; ++i) s += v[i - k] * cj[i];
            s *= beta;
            for (int i = k; i < m; ++i) cj[i] -= s * v[i - k];
        }
        reflectors[k] = std::move(v);
        betas[k] = beta;
    }

    r = Mat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) r(i, j) = col(j)[i];

    // q_thin = H_0 ... H_{n-1} applied to the first n identity columns
    std::vector<double> q(static_cast<size_t>(m) * n, 0.0);
    auto qcol = [&](int j) { return q.data() + static_cast<size_t>(j) * m; };
    for (int j = 0; j < n; ++j) qcol(j)[j] = 1.0;
    for (int k = n - 1; k >= 0; --k) {
        if (reflectors[k].empty()) continue;
        const auto& v = reflectors[k];
        const double beta = betas[k];
        for (int j = 0; j < n; ++j) {
            double* cj = qcol(j);
            double s = 0.0;
            for (int i = k; i < m; ++i) s += v[i - k] * cj[i];
            s *= beta;
            for (int i = k; i < m; ++i) cj[i] -= s * v[i - k];
        }
    }
    q_thin = Mat(m, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) q_thin(i, j) = qcol(j)[i];
}

// One-sided Jacobi: orthogonalizes the n columns (each of length m, stored
// column-major in w) in place, accumulating the right rotations into vt
// (row p of vt is column p of V). Returns the max relative off-diagonal
// seen in the last sweep.
double jacobi_orthogonalize(std::vector<double>& w, int m, int n, Mat& vt, bool& converged) {
    auto col = [&](int j) { return w.data() + static_cast<size_t>(j) * m; };
    vt = Mat::identity(n);
    std::vector<double> sq(n, 0.0);  // cached squared column norms

    converged = false;
    double max_off = 0.0;
    for (int sweep = 0; sweep < kJacobiMaxSweeps; ++sweep) {
        for (int j = 0; j < n; ++j) {
            double* cj = col(j);
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += cj[i] * cj[i];
            // columns that shrank to the denormal floor can never be rotated
            // clean; inputs are pre-scaled to O(1), so these are exact zeros
            // for any practical purpose
            if (s < 1e-280) {
                for (int i = 0; i < m; ++i) cj[i] = 0.0;
                s = 0.0;
            }
            sq[j] = s;
        }
        max_off = 0.0;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double app = sq[p], aqq = sq[q];
                if (app == 0.0 || aqq == 0.0) continue;
                double* cp = col(p);
                double* cq = col(q);
                double apq = 0.0;
                for (int i = 0; i < m; ++i) apq += cp[i] * cq[i];
                const double off = std::fabs(apq) / std::sqrt(app * aqq);
                max_off = std::max(max_off, off);
                if (off <= kJacobiTol) continue;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                double np2 = 0.0, nq2 = 0.0;  // fresh norms; cached updates can
                for (int i = 0; i < m; ++i) {  // go negative under cancellation
                    const double xp = cp[i], xq = cq[i];
                    cp[i] = c * xp - s * xq;
                    cq[i] = s * xp + c * xq;
                    np2 += cp[i] * cp[i];
                    nq2 += cq[i] * cq[i];
                }
                double* vp = vt.row(p);
                double* vq = vt.row(q);
                for (int i = 0; i < n; ++i) {
                    const double xp = vp[i], xq = vq[i];
                    vp[i] = c * xp - s * xq;
                    vq[i] = s * xp + c * xq;
                }
                sq[p] = np2;
                sq[q] = nq2;
            }
        }
        if (max_off <= kJacobiTol) {  // nothing rotated this sweep
            converged = true;
            return max_off;
        }
    }
    return max_off;
}

// Replaces zero columns of u (k x n, column-major in w after normalization)
// with unit vectors orthogonal to all filled columns.
void complete_null_columns(std::vector<double>& w, int m, int n, const std::vector<bool>& is_zero) {
    auto col = [&](int j) { return w.data() + static_cast<size_t>(j) * m; };
    std::vector<bool> filled(n);
    for (int j = 0; j < n; ++j) filled[j] = !is_zero[j];
    for (int j = 0; j < n; ++j) {
        if (filled[j]) continue;
        double* cj = col(j);
        bool placed = false;
        for (int e = 0; e < m && !placed; ++e) {
            std::vector<double> cand(m, 0.0);
            cand[e] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {  // twice for orthogonality
                for (int o = 0; o < n; ++o) {
                    if (!filled[o]) continue;
                    const double* co = col(o);
                    double d = 0.0;
                    for (int i = 0; i < m; ++i) d += co[i] * cand[i];
                    for (int i = 0; i < m; ++i) cand[i] -= d * co[i];
                }
            }
            double norm2 = 0.0;
            for (double x : cand) norm2 += x * x;
            if (norm2 >= 0.25) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (int i = 0; i < m; ++i) cj[i] = cand[i] * inv;
                placed = true;
            }
        }
        if (!placed) throw ConvergenceFailure("svd_full: could not complete orthonormal basis");
        filled[j] = true;
    }
}

SvdResult svd_core(const Mat& a0) {
    const int m = a0.rows, n = a0.cols;  // m >= n here
    // pre-scale to O(1) so column norms stay far from the denormal range
    const double amax = max_abs(a0);
    const Mat a = amax > 0.0 ? scaled(a0, 1.0 / amax) : a0;

    Mat q_thin, work_in;
    const bool use_qr = m > n;
    if (use_qr) {
        householder_qr(a, q_thin, work_in);
    } else {
        work_in = a;
    }
    const int k = use_qr ? n : m;  // row count of the Jacobi working matrix

    std::vector<double> w(static_cast<size_t>(k) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < k; ++i) w[static_cast<size_t>(j) * k + i] = work_in(i, j);
    auto col = [&](int j) { return w.data() + static_cast<size_t>(j) * k; };

    Mat vt;
    bool converged = false;
    const double max_off = jacobi_orthogonalize(w, k, n, vt, converged);
    if (!converged) {
        std::ostringstream msg;
        msg << "svd_full: Jacobi did not converge after " << kJacobiMaxSweeps
            << " sweeps (" << m << "x" << n << ", max relative off-diagonal "
            << max_off << ")";
        throw ConvergenceFailure(msg.str());
    }

    std::vector<double> sigma(n);  // in scaled units until output
    for (int j = 0; j < n; ++j) {
        double s2 = 0.0;
        const double* cj = col(j);
        for (int i = 0; i < k; ++i) s2 += cj[i] * cj[i];
        sigma[j] = std::sqrt(s2);
    }

    // stable descending sort; equal values keep sweep order
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(),
                     [&](int x, int y) { return sigma[x] > sigma[y]; });

    std::vector<double> uw(static_cast<size_t>(k) * n);
    std::vector<double> sig_sorted(n);
    Mat vt_sorted(n, n);
    std::vector<bool> is_zero(n, false);
    for (int j = 0; j < n; ++j) {
        const int src = perm[j];
        sig_sorted[j] = sigma[src];
        const double* cs = col(src);
        double* cd = uw.data() + static_cast<size_t>(j) * k;
        if (sigma[src] == 0.0) {
            is_zero[j] = true;
        } else {
            const double inv = 1.0 / sigma[src];
            for (int i = 0; i < k; ++i) cd[i] = cs[i] * inv;
        }
        const double* vs = vt.row(src);
        double* vd = vt_sorted.row(j);
        for (int i = 0; i < n; ++i) vd[i] = vs[i];
    }
    complete_null_columns(uw, k, n, is_zero);

    Mat u_small(k, n);
    for (int j = 0; j < n; ++j) {
        const double* cj = uw.data() + static_cast<size_t>(j) * k;
        for (int i = 0; i < k; ++i) u_small(i, j) = cj[i];
    }

    if (amax > 0.0)
        for (double& s : sig_sorted) s *= amax;

    SvdResult out;
    out.sigma = std::move(sig_sorted);
    out.u = use_qr ? matmul(q_thin, u_small) : std::move(u_small);

    // sign convention on the final factors: largest-magnitude entry of each
    // left singular vector nonnegative (first occurrence wins ties)
    for (int j = 0; j < n; ++j) {
        int arg = 0;
        double best = std::fabs(out.u(0, j));
        for (int i = 1; i < m; ++i) {
            const double v = std::fabs(out.u(i, j));
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        if (out.u(arg, j) < 0.0) {
            for (int i = 0; i < m; ++i) out.u(i, j) = -out.u(i, j);
            double* vr = vt_sorted.row(j);
            for (int i = 0; i < n; ++i) vr[i] = -vr[i];
        }
    }
    out.v = transpose(vt_sorted);
    return out;
}

}  // namespace

Mat cholesky_lower(const Mat& c) {
    if (c.rows != c.cols) throw DimensionMismatch("cholesky_lower: matrix not square");
    const int n = c.rows;
    const double scale = std::max(max_abs(c), 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::fabs(c(i, j) - c(j, i)) > 1e-12 * scale)
                throw DataError("cholesky_lower: input not symmetric");

    Mat l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = c(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) {
            std::ostringstream msg;
            msg << "cholesky_lower: pivot " << j << " not positive (" << d
                << "); increase damping";
            throw NotPositiveDefinite(msg.str());
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = c(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

SvdResult svd_full(const Mat& a) {
    if (a.rows <= 0 || a.cols <= 0) throw DimensionMismatch("svd_full: empty matrix");
    if (a.rows >= a.cols) return svd_core(a);
    SvdResult t = svd_core(transpose(a));
    SvdResult out;
    out.u = std::move(t.v);
    out.sigma = std::move(t.sigma);
    out.v = std::move(t.u);
    return out;
}

Mat solve_lower_triangular(const Mat& l, const Mat& b) {
    if (l.rows != l.cols) throw DimensionMismatch("solve_lower_triangular: l not square");
    if (b.rows != l.rows) throw DimensionMismatch("solve_lower_triangular: row count mismatch");
    const int n = l.rows, m = b.cols;
    for (int i = 0; i < n; ++i)
        if (l(i, i) == 0.0) throw SingularTriangular("solve_lower_triangular: zero diagonal entry");
    Mat y = b;
    for (int i = 0; i < n; ++i) {
        double* yi = y.row(i);
        for (int k = 0; k < i; ++k) {
            const double lik = l(i, k);
            const double* yk = y.row(k);
            for (int j = 0; j < m; ++j) yi[j] -= lik * yk[j];
        }
        const double lii = l(i, i);
        for (int j = 0; j < m; ++j) yi[j] /= lii;
    }
    return y;
}

namespace {

// solves l^T * Y = b by backward substitution (l lower triangular, nonzero diag)
Mat solve_lower_transposed(const Mat& l, const Mat& b) {
    const int n = l.rows, m = b.cols;
    Mat y = b;
    for (int i = n - 1; i >= 0; --i) {
        double* yi = y.row(i);
        for (int k = i + 1; k < n; ++k) {
            const double lki = l(k, i);
            const double* yk = y.row(k);
            for (int j = 0; j < m; ++j) yi[j] -= lki * yk[j];
        }
        const double lii = l(i, i);
        for (int j = 0; j < m; ++j) yi[j] /= lii;
    }
    return y;
}

}  // namespace

Mat least_squares_left(const Mat& t, const Mat& d, double ridge) {
    if (t.cols != d.cols) throw DimensionMismatch("least_squares_left: column counts differ");
    if (ridge < 0.0) throw DataError("least_squares_left: negative ridge");
    Mat g = matmul(d, transpose(d));
    for (int i = 0; i < g.rows; ++i) g(i, i) += ridge;
    Mat lfac;
    try {
        lfac = cholesky_lower(g);
    } catch (const NotPositiveDefinite&) {
        throw SingularNormalEquations(
            "least_squares_left: normal matrix not positive definite; increase ridge");
    }
    Mat rhs = matmul(d, transpose(t));  // r x M
    Mat z = solve_lower_triangular(lfac, rhs);
    Mat ut = solve_lower_transposed(lfac, z);
    return transpose(ut);
}

double frob_norm(const Mat& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

}  // namespace odlm::linalg
