#pragma once

#include <string>
#include <vector>

#include "odlm/mat.hpp"

namespace odlm::compress {

/// Rank-r factor pair replacing a dense M x N weight. By construction
/// a = U_r * diag(sigma_retained) and b = V_r^T * S^{-1}, so a*b is the
/// rank-r whitened reconstruction. Applied as a*(b*x), never materialized.
struct CompressedLayer {
    std::string layer_id;
    int m = 0;     // output dim
    int n = 0;     // input dim
    int rank = 0;  // retained rank
    Mat a;         // m x rank
    Mat b;         // rank x n
    std::vector<double> sigma_retained;   // length rank, descending
    std::vector<double> sigma_truncated;  // length min(m,n) - rank
};

}  // namespace odlm::compress
