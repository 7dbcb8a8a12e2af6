#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "powertrend/model.hpp"

namespace powertrend {

// Finite moving-average kernel: x_u = sum_v coef_v * eps_{u-v} with
// independent standard-normal innovations scaled by sigma_eps.
struct MaKernel {
    struct Tap {
        std::vector<int> offset;
        double coef = 0.0;
    };
    std::vector<Tap> taps;
    double sigma_eps = 1.0;

    int dimension() const;
    double coefficient_sum() const;
    double coefficient_square_sum() const;
    // Largest |offset_i| per dimension; the innovation padding widths.
    std::vector<int> max_offsets() const;
    // Throws std::invalid_argument unless taps are nonempty with consistent
    // dimension, distinct offsets, and include the zero offset.
    void validate() const;
};

struct ErrorFieldModel {
    enum class Kind { iid, finite_ma };
    Kind kind = Kind::iid;
    double sigma = 1.0;  // iid only
    MaKernel kernel;     // finite_ma only

    static ErrorFieldModel iid(double sigma);
    static ErrorFieldModel finite_ma(MaKernel kernel);

    // Long-run variance 2*pi*F(0) = (sum coef)^2 * sigma_eps^2 (sigma^2 when iid).
    double long_run_variance() const;
    // Marginal variance sum coef^2 * sigma_eps^2.
    double marginal_variance() const;
};

// The three two-dimensional kernels used in the reference experiments:
//   ma1_multidirection: center 1, -0.12 on all 8 neighbors
//   ma4_multilateral:   center 1, (0.14,0.12,0.10,0.08) at (+-j,0),(0,+-j)
//   ma9_diagonal:       center 1, 0.95^|j| at (j,j), j = +-1..+-9
MaKernel builtin_kernel(const std::string& name);

// Draws the error field on the extents box. Innovations live on the padded
// box [1-M_i, n_i+M_i] so every site is convolved with fully in-sample
// innovations; no edge truncation. Deterministic given (model, n, seed).
LatticeGrid gen_error_field(const ErrorFieldModel& model, std::span<const int> extents,
                            std::uint64_t seed);

// Trend surface plus error field.
LatticeGrid gen_dataset(const ExponentVector& theta, const CoefficientVector& beta,
                        const ErrorFieldModel& model, std::span<const int> extents,
                        std::uint64_t seed);

}  // namespace powertrend
