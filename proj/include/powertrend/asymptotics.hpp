#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "powertrend/model.hpp"
#include "powertrend/nlse.hpp"

namespace powertrend {

// Limit-theory building blocks evaluated at a parameter point.
// Phi has block-Cauchy structure: diagonal blocks 1/(g_ij + h_ik + 1),
// off-diagonal blocks phi_i phi_j'. PhiPlus and PhiPlusPlus attach one and
// two log factors; Upsilon = PhiPlusPlus - PhiPlus' Phi^-1 PhiPlus.
struct LimitMatrices {
    std::vector<Eigen::VectorXd> phi;  // per dimension, entries 1/(theta_ij+1)
    Eigen::MatrixXd Phi;
    Eigen::MatrixXd PhiPlus;
    Eigen::MatrixXd PhiPlusPlus;
    Eigen::MatrixXd Upsilon;
    Eigen::MatrixXd B;          // p x 2p, (beta_diag^-1, -I)
    Eigen::VectorXd beta_diag;  // diagonal of beta_Delta
};

// General Phi(g,h) for same-shape exponent vectors.
Eigen::MatrixXd phi_matrix(const ExponentVector& g, const ExponentVector& h);

// Builds all limit matrices at (theta, beta). The Phi inverse inside
// Upsilon uses the analytic block-Cauchy path when the closed forms are
// well conditioned and falls back to a generic dense solve otherwise.
// Throws DegenerateUpsilon if Upsilon is not positive definite.
LimitMatrices limit_matrices(const ExponentVector& theta, const CoefficientVector& beta);

// Closed-form inverse of Phi(theta,theta). Exponent layout maps onto the
// block-Cauchy structure: per-dimension Cauchy blocks tied together by
// rank-one couplings, plus a bordered variant when exactly one exponent is
// zero. Throws FormulaSingularity when a denominator |v_ik - v_im|, |v_ik|
// or |1 + 2 v_ik| falls below 1e-12, or when two exponents are zero.
Eigen::MatrixXd cauchy_block_inverse(const ExponentVector& theta);

// Diagonals of the norming matrices: D = sqrt(N) diag(n_i^{theta_ij}),
// L = diag(log n_i) blockwise.
struct Normings {
    Eigen::VectorXd D;
    Eigen::VectorXd L;
};
Normings normings(const ExponentVector& theta, std::span<const int> extents);

struct ParamInference {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    std::array<double, 2> ci95{0.0, 0.0};
};

// Plug-in covariance of all 2p estimates (theta block first), in original
// unnormalized scale, together with marginal standard errors. The matrix
// has rank p: coefficient errors are asymptotically driven by exponent
// errors.
struct InferenceReport {
    int p = 0;  // theta block size; params has 2p entries
    Eigen::MatrixXd covariance;
    std::vector<ParamInference> params;
    double two_pi_f0 = 0.0;
};

InferenceReport covariance(const FitResult& fit, std::span<const int> extents,
                           double two_pi_f0);

// Covariance of the known-theta LSE: 2*pi*F(0) D^-1 Phi^-1 D^-1.
Eigen::MatrixXd lse_covariance(const ExponentVector& theta, std::span<const int> extents,
                               double two_pi_f0);

struct WaldResult {
    double z = 0.0;
    double p_value = 1.0;
};

// Two-sided normal test of params[index] against null_value. Zero nulls
// for the beta block are rejected with ZeroNullForBeta: the parameter
// space excludes vanishing coefficients, so that restriction is untestable.
WaldResult wald_test(const InferenceReport& report, int index, double null_value);

// Normal critical values used for tests and intervals.
inline constexpr double kCrit5 = 1.959963984540054;
inline constexpr double kCrit1 = 2.5758293035489004;

}  // namespace powertrend
