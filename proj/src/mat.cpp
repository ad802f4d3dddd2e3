#include "odlm/mat.hpp"

#include <cmath>
#include <cstdlib>
#include <utility>

namespace odlm {

Mat::Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw DimensionMismatch("Mat: negative dimension");
}

Mat::Mat(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (r < 0 || c < 0) throw DimensionMismatch("Mat: negative dimension");
    if (data.size() != static_cast<size_t>(r) * c)
        throw DimensionMismatch("Mat: data length does not match rows*cols");
    check_finite("Mat construction");
}

void Mat::check_finite(const char* what) const {
    for (double v : data)
        if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite entry");
}

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::diag(std::span<const double> d) {
    const int n = static_cast<int>(d.size());
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = d[i];
    return m;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw DimensionMismatch("matmul: inner dimensions differ");
    Mat c(a.rows, b.cols);
    // i-k-j loop order: contiguous row access, and c(i,j) accumulates over
    // ascending k so sums match a naive triple loop bit for bit.
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat operator+(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("operator+: shape mismatch");
    Mat c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Mat operator-(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("operator-: shape mismatch");
    Mat c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Mat scaled(const Mat& a, double s) {
    Mat c = a;
    for (double& v : c.data) v *= s;
    return c;
}

std::vector<double> matvec(const Mat& a, std::span<const double> x) {
    if (static_cast<size_t>(a.cols) != x.size())
        throw DimensionMismatch("matvec: vector length does not match cols");
    std::vector<double> y(a.rows, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double s = 0.0;
        for (int j = 0; j < a.cols; ++j) s += arow[j] * x[j];
        y[i] = s;
    }
    return y;
}

double max_abs(const Mat& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace odlm
