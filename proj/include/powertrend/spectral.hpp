#pragma once

#include <span>
#include <vector>

#include "powertrend/model.hpp"

namespace powertrend {

struct LrvOptions {
    enum class Mode { independence, nonparametric };
    Mode mode = Mode::independence;
    // Per-dimension lag bandwidths m_i, 0 <= m_i < n_i; empty selects
    // floor(n_i^(1/3)) capped at n_i - 1.
    std::vector<int> bandwidth;

    std::vector<int> resolve_bandwidth(std::span<const int> extents) const;
};

// 2*pi*F(0) under independence: the sum of squared residuals divided by N.
double lrv_independence(const LatticeGrid& residuals);

// Bartlett-tapered autocovariance sum over lags |v_i| <= m_i:
//   sum_v prod_i (1 - |v_i|/(m_i+1)) gamma_hat_v
// with gamma_hat_v the mean-of-products autocovariance (denominator N),
// floored at 1e-6 * RSS/N so the estimate stays positive even under strong
// negative dependence. With m = 0 this equals lrv_independence exactly.
// Throws BandwidthTooLarge when any m_i >= n_i.
double lrv_nonparametric(const LatticeGrid& residuals, const LrvOptions& opts);

}  // namespace powertrend
