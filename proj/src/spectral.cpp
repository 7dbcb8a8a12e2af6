#include "powertrend/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "powertrend/errors.hpp"

namespace powertrend {

std::vector<int> LrvOptions::resolve_bandwidth(std::span<const int> extents) const {
    const int d = static_cast<int>(extents.size());
    std::vector<int> m(d);
    if (bandwidth.empty()) {
        for (int i = 0; i < d; ++i)
            m[i] = std::min(static_cast<int>(std::floor(std::cbrt(extents[i]))),
                            extents[i] - 1);
    } else {
        if (static_cast<int>(bandwidth.size()) != d)
            throw std::invalid_argument("LrvOptions: bandwidth must have d entries");
        m = bandwidth;
    }
    for (int i = 0; i < d; ++i) {
        if (m[i] < 0) throw std::invalid_argument("LrvOptions: bandwidth must be >= 0");
        if (m[i] >= extents[i])
            throw BandwidthTooLarge("lrv bandwidth must satisfy m_i < n_i");
    }
    return m;
}

double lrv_independence(const LatticeGrid& residuals) {
    residuals.validate();
    double s = 0.0;
    for (double r : residuals.values) s += r * r;
    return s / static_cast<double>(residuals.site_count());
}

namespace {

// gamma_hat_v = (1/N) sum over overlapping pairs r_u r_{u+v}
double sample_autocov(const LatticeGrid& res, std::span<const int> lag) {
    const int d = static_cast<int>(res.extents.size());
    std::vector<int> lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        lo[i] = std::max(1, 1 - lag[i]);
        hi[i] = std::min(res.extents[i], res.extents[i] - lag[i]);
        if (lo[i] > hi[i]) return 0.0;
    }
    std::vector<int> u = lo;
    std::vector<int> shifted(d);
    double s = 0.0;
    while (true) {
        for (int i = 0; i < d; ++i) shifted[i] = u[i] + lag[i];
        s += res.values[res.flat_index(u)] * res.values[res.flat_index(shifted)];
        int i = d - 1;
        for (; i >= 0; --i) {
            if (u[i] < hi[i]) {
                ++u[i];
                break;
            }
            u[i] = lo[i];
        }
        if (i < 0) break;
    }
    return s / static_cast<double>(res.site_count());
}

}  // namespace

double lrv_nonparametric(const LatticeGrid& residuals, const LrvOptions& opts) {
    residuals.validate();
    const int d = static_cast<int>(residuals.extents.size());
    const std::vector<int> m = opts.resolve_bandwidth(residuals.extents);

    std::vector<int> lag(d);
    for (int i = 0; i < d; ++i) lag[i] = -m[i];
    double total = 0.0;
    while (true) {
        double weight = 1.0;
        for (int i = 0; i < d; ++i)
            weight *= 1.0 - std::abs(lag[i]) / static_cast<double>(m[i] + 1);
        total += weight * sample_autocov(residuals, lag);
        int i = d - 1;
        for (; i >= 0; --i) {
            if (lag[i] < m[i]) {
                ++lag[i];
                break;
            }
            lag[i] = -m[i];
        }
        if (i < 0) break;
    }
    const double floor_value = 1e-6 * lrv_independence(residuals);
    return std::max(total, floor_value);
}

}  // namespace powertrend
