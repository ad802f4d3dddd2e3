#pragma once

// Test-only reference implementations, kept independent of the production
// kernels they check. Nothing in src/ may include this header.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "odlm/mat.hpp"

namespace oracles {

inline odlm::Mat make_random_mat(int rows, int cols, uint32_t seed, double lo = -1.0,
                                 double hi = 1.0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    odlm::Mat m(rows, cols);
    for (double& v : m.data) v = dist(gen);
    return m;
}

struct OracleSvd {
    std::vector<double> sigma;  // descending
    odlm::Mat u;                // rows x n (zero columns where sigma == 0)
    odlm::Mat v;                // cols x n
};

// Plain one-sided Jacobi on columns held as vector-of-vectors; no QR step,
// no sign convention. Input must have rows >= cols; callers transpose.
inline OracleSvd jacobi_svd_tall(const odlm::Mat& a) {
    const int m = a.rows, n = a.cols;
    if (m < n) throw std::logic_error("jacobi_svd_tall: need rows >= cols");
    std::vector<std::vector<double>> col(n, std::vector<double>(m));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) col[j][i] = a(i, j);
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (int j = 0; j < n; ++j) v[j][j] = 1.0;

    const double tol = 1e-14;
    bool done = false;
    for (int sweep = 0; sweep < 100 && !done; ++sweep) {
        done = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0, aqq = 0, apq = 0;
                for (int i = 0; i < m; ++i) {
                    app += col[p][i] * col[p][i];
                    aqq += col[q][i] * col[q][i];
                    apq += col[p][i] * col[q][i];
                }
                if (app == 0.0 || aqq == 0.0) continue;
                if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
                done = false;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t =
                    (tau >= 0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int i = 0; i < m; ++i) {
                    const double xp = col[p][i], xq = col[q][i];
                    col[p][i] = c * xp - s * xq;
                    col[q][i] = s * xp + c * xq;
                }
                for (int i = 0; i < n; ++i) {
                    const double xp = v[p][i], xq = v[q][i];
                    v[p][i] = c * xp - s * xq;
                    v[q][i] = s * xp + c * xq;
                }
            }
        }
    }
    if (!done) throw std::runtime_error("jacobi_svd_tall: no convergence");

    std::vector<double> sigma(n);
    for (int j = 0; j < n; ++j) {
        double s2 = 0;
        for (int i = 0; i < m; ++i) s2 += col[j][i] * col[j][i];
        sigma[j] = std::sqrt(s2);
    }
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return sigma[x] > sigma[y]; });

    OracleSvd out;
    out.sigma.resize(n);
    out.u = odlm::Mat(m, n);
    out.v = odlm::Mat(n, n);
    for (int j = 0; j < n; ++j) {
        const int src = idx[j];
        out.sigma[j] = sigma[src];
        if (sigma[src] > 0.0)
            for (int i = 0; i < m; ++i) out.u(i, j) = col[src][i] / sigma[src];
        for (int i = 0; i < n; ++i) out.v(i, j) = v[src][i];
    }
    return out;
}

inline OracleSvd jacobi_svd(const odlm::Mat& a) {
    if (a.rows >= a.cols) return jacobi_svd_tall(a);
    OracleSvd t = jacobi_svd_tall(odlm::transpose(a));
    std::swap(t.u, t.v);
    return t;
}

// Outer-product (rank-1 update) Cholesky, a different organization than the
// production inner-product form.
inline odlm::Mat cholesky_outer(const odlm::Mat& c) {
    const int n = c.rows;
    odlm::Mat w = c;
    odlm::Mat l(n, n);
    for (int k = 0; k < n; ++k) {
        const double d = w(k, k);
        if (!(d > 0.0)) throw std::runtime_error("cholesky_outer: not positive definite");
        const double lkk = std::sqrt(d);
        l(k, k) = lkk;
        for (int i = k + 1; i < n; ++i) l(i, k) = w(i, k) / lkk;
        for (int i = k + 1; i < n; ++i)
            for (int j = k + 1; j <= i; ++j) {
                w(i, j) -= l(i, k) * l(j, k);
                w(j, i) = w(i, j);
            }
    }
    return l;
}

// Column-oriented forward substitution for L y = b.
inline odlm::Mat forward_solve(const odlm::Mat& l, const odlm::Mat& b) {
    const int n = l.rows, m = b.cols;
    odlm::Mat y = b;
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < m; ++j) y(k, j) /= l(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double lik = l(i, k);
            for (int j = 0; j < m; ++j) y(i, j) -= lik * y(k, j);
        }
    }
    return y;
}

inline double frob_inner(const odlm::Mat& a, const odlm::Mat& b) {
    double s = 0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// Steepest descent with exact line search on ||t - U d||_F^2; returns the
// converged residual norm.
inline double gd_least_squares_residual(const odlm::Mat& t, const odlm::Mat& d,
                                        int max_iters = 50000) {
    using odlm::Mat;
    Mat u(t.rows, d.rows);  // start at zero
    for (int it = 0; it < max_iters; ++it) {
        Mat r = t - odlm::matmul(u, d);                  // residual
        Mat g = odlm::scaled(odlm::matmul(r, odlm::transpose(d)), -2.0);  // grad
        double gnorm2 = frob_inner(g, g);
        if (gnorm2 < 1e-28) break;
        Mat gd = odlm::matmul(g, d);
        const double denom = frob_inner(gd, gd);
        if (denom <= 0.0) break;
        // U' = U + beta*G gives residual R0 - beta*G*d; optimal beta below
        const double beta = frob_inner(r, gd) / denom;
        for (size_t i = 0; i < u.data.size(); ++i) u.data[i] += beta * g.data[i];
    }
    Mat r = t - odlm::matmul(u, d);
    return std::sqrt(frob_inner(r, r));
}

// Cyclic two-sided Jacobi eigen-decomposition for a symmetric matrix.
// Returns eigenvalues (descending) and eigenvectors as matching columns.
inline std::pair<std::vector<double>, odlm::Mat> sym_eigen(const odlm::Mat& a0) {
    const int n = a0.rows;
    odlm::Mat a = a0;
    odlm::Mat v = odlm::Mat::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a(p, q)));
        if (off < 1e-13) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = a(i, i);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return eig[x] > eig[y]; });
    std::vector<double> es(n);
    odlm::Mat vs(n, n);
    for (int j = 0; j < n; ++j) {
        es[j] = eig[idx[j]];
        for (int i = 0; i < n; ++i) vs(i, j) = v(i, idx[j]);
    }
    return {es, vs};
}

}  // namespace oracles
