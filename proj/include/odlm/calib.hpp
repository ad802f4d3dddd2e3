#pragma once

#include <map>
#include <string>
#include <vector>

#include "odlm/mat.hpp"
#include "odlm/recmodel.hpp"

namespace odlm::calib {

/// Per-layer Gram accumulator: gram = sum of x x^T over all calibration
/// tokens seen at that layer's input. Never materializes X unless asked.
struct ActivationStats {
    std::string layer_id;
    int dim = 0;
    Mat gram;  // dim x dim
    long token_count = 0;
};

struct WhiteningFactor {
    std::string layer_id;
    Mat s;      // lower-triangular Cholesky factor of the damped covariance
    Mat s_inv;  // lower-triangular inverse of s
    double damping_used = 0.0;  // epsilon added to the diagonal
};

/// Seeded sample of `count` indices out of `pool`, returned in ascending
/// order so accumulation follows dataset order.
std::vector<size_t> sample_indices(size_t pool, size_t count, uint64_t seed);

struct CalibCapture {
    std::map<std::string, ActivationStats> stats;
    std::map<std::string, Mat> x;  // dim x tokens, only when materialized
    long sequences_used = 0;
};

/// Runs the model over a seeded sample of sequences, accumulating per-layer
/// input Grams. With materialize set, also keeps the activation matrices
/// (debug mode; memory grows with token count).
CalibCapture collect_calibration(const rec::RecModel& model,
                                 const std::vector<std::vector<rec::ItemId>>& sequences,
                                 int sample_count, uint64_t seed, bool materialize);

std::map<std::string, ActivationStats> collect_activations(
    const rec::RecModel& model, const std::vector<std::vector<rec::ItemId>>& sequences,
    int sample_count, uint64_t seed);

/// gram + eps*I with eps = eps_rel * trace(gram)/N.
Mat damped_covariance(const ActivationStats& stats, double eps_rel);

/// Cholesky whitening: s*s^T = c, s_inv by triangular solves. Propagates
/// NotPositiveDefinite; callers escalate damping.
WhiteningFactor whitening_factor(const Mat& c);

/// damped_covariance + whitening_factor with eps_rel doubled on
/// NotPositiveDefinite, up to max_retries extra attempts.
WhiteningFactor whitening_with_retries(const ActivationStats& stats, double eps_rel,
                                       int max_retries = 4);

/// s = s_inv = I; stands in for whitening in the no-normalization ablation.
WhiteningFactor identity_whitening(int n);

}  // namespace odlm::calib
