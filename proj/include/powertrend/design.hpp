#pragma once

#include <Eigen/Dense>
#include <span>

#include "powertrend/model.hpp"

namespace powertrend {

// Normal-equation pieces for a candidate exponent vector h.
// scale holds the diagonal of D(h) = sqrt(N) * diag(n_i^{h_ij});
// condition estimates the scaled system D(h)^-1 M D(h)^-1.
struct GramSystem {
    Eigen::MatrixXd M;
    Eigen::VectorXd rhs;
    Eigen::VectorXd scale;
    double condition = 0.0;
};

// M(g,h) = sum_u f(u;g) f(u;h)', computed through separable 1-D power sums.
Eigen::MatrixXd gram_matrix(const ExponentVector& g, const ExponentVector& h,
                            std::span<const int> extents);

// D(h)^-1 M(h,h) D(h)^-1; every entry is a normalized power-sum average
// in (0, 1] and converges to Phi(h,h) as the extents grow.
Eigen::MatrixXd scaled_gram(const ExponentVector& h, std::span<const int> extents);

struct ProfileResult {
    CoefficientVector beta;
    GramSystem system;
    double rss = 0.0;
    // Residuals y_u - beta' f(u;h), on the same grid.
    LatticeGrid residuals;
};

// Profiled least-squares coefficients beta_hat(h): solves the normal
// equations in D(h)^-1 coordinates by orthogonal (eigen) decomposition.
// Throws NearSingularGram when the scaled condition exceeds the threshold.
ProfileResult profile_beta(const ExponentVector& h, const LatticeGrid& grid,
                           double condition_threshold = 1e12);

// Profiled objective R(h) = min_b Q(b,h), the sum of squared residuals at
// beta_hat(h).
double profile_rss(const ExponentVector& h, const LatticeGrid& grid,
                   double condition_threshold = 1e12);

}  // namespace powertrend
