#pragma once

#include <string>
#include <vector>

#include "powertrend/model.hpp"

namespace powertrend {

struct FitOptions {
    // Coarse product-grid points per exponent across [lower, upper].
    int coarse_resolution = 9;
    // Number of best coarse points kept as refinement multistarts.
    int multistart = 5;
    // Simplex convergence tolerance on exponents.
    double tolerance = 1e-7;
    // Refinement iteration cap per multistart seed.
    int max_iterations = 500;
    // Scaled-Gram condition threshold passed through to the profile solve.
    double condition_threshold = 1e12;

    void validate() const;
};

struct FitResult {
    ExponentVector theta_hat;
    CoefficientVector beta_hat;
    double rss = 0.0;
    double sigma2_hat = 0.0;  // rss / N
    long long n_evals = 0;
    bool converged = false;
    double gram_condition = 0.0;  // scaled-system condition at theta_hat
    std::vector<std::string> warnings;
};

// Nonlinear least-squares fit: coarse delta-feasible grid scan of the
// profiled objective followed by simplex refinement from the best seeds,
// with bound/separation feasibility enforced by projection. Deterministic
// given (grid, spec, space, opts).
// Throws InsufficientData when N <= 2p and AllGridPointsSingular when every
// feasible coarse candidate fails the conditioning check.
FitResult fit(const LatticeGrid& grid, const ModelSpec& spec, const ParamSpace& space,
              const FitOptions& opts = {});

// Least squares with the exponents treated as known: the comparison
// estimator beta_tilde. Identical to the profiled coefficients at theta.
CoefficientVector lse_known_theta(const LatticeGrid& grid, const ExponentVector& theta,
                                  double condition_threshold = 1e12);

}  // namespace powertrend
