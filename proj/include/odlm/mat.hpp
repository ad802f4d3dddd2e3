#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "odlm/errors.hpp"

namespace odlm {

/// Dense row-major matrix of 64-bit reals. The single carrier for weights,
/// activations, covariance matrices and SVD factors.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major, length rows*cols

    Mat() = default;
    Mat(int r, int c);                             // zero-filled
    Mat(int r, int c, std::vector<double> d);      // validates length and finiteness

    double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    static Mat identity(int n);
    static Mat diag(std::span<const double> d);

    /// Throws DataError if any entry is NaN or Inf.
    void check_finite(const char* what) const;
};

Mat transpose(const Mat& a);
Mat matmul(const Mat& a, const Mat& b);
Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat scaled(const Mat& a, double s);

/// y = a * x for a column vector x.
std::vector<double> matvec(const Mat& a, std::span<const double> x);

double max_abs(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);

}  // namespace odlm
