#pragma once

#include <span>
#include <string>
#include <vector>

namespace powertrend {

// Number of power terms per lattice dimension. A dimension with
// p_per_dim[i] == 0 contributes no regressors.
struct ModelSpec {
    int d = 1;
    std::vector<int> p_per_dim;

    int total_p() const;
    // Throws std::invalid_argument on d < 1, size mismatch, negative p_i,
    // or total_p() == 0.
    void validate() const;
};

// Exponents theta (or a candidate h), stored per dimension. Valid vectors
// are strictly ascending within each dimension with every entry > -1/2.
struct ExponentVector {
    std::vector<std::vector<double>> dims;

    int total_size() const;
    // Entries flattened dimension-major, exponent-ascending; the canonical
    // stacking order shared by every matrix and vector in the library.
    std::vector<double> flatten() const;
    static ExponentVector from_flat(std::span<const double> flat, const ModelSpec& spec);
    bool same_shape(const ExponentVector& other) const;
};

// Coefficients beta, one per regressor, same per-dimension layout.
struct CoefficientVector {
    std::vector<std::vector<double>> dims;

    int total_size() const;
    std::vector<double> flatten() const;
    static CoefficientVector from_flat(std::span<const double> flat, const ModelSpec& spec);
};

// Compact exponent search box: per-dimension bounds and a global
// separation delta between consecutive exponents of the same dimension.
struct ParamSpace {
    std::vector<double> lower;  // each > -1/2
    std::vector<double> upper;
    double delta = 0.05;

    // Bounds [-0.45, 4] in every dimension, delta = 0.05.
    static ParamSpace defaults(int d);
    // Throws std::invalid_argument if bounds are inconsistent, a lower
    // bound is <= -1/2, or the box cannot hold p_i delta-separated points.
    void validate(const ModelSpec& spec) const;
};

// Observations y_u on the full box {1..n_1} x ... x {1..n_d}, stored
// row-major (first dimension slowest).
struct LatticeGrid {
    std::vector<int> extents;
    std::vector<double> values;

    long long site_count() const;
    std::size_t flat_index(std::span<const int> u) const;
    // Throws std::invalid_argument on nonpositive extents, size mismatch,
    // or non-finite values.
    void validate() const;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
};

// f(u; theta): regressor vector of length p in canonical stacking order.
// The block for dimension i depends only on u_i; an exponent of exactly 0
// yields the constant regressor 1.
std::vector<double> eval_regressor(std::span<const int> u, const ExponentVector& theta);

// f(u; theta)' beta, the deterministic trend at site u.
double trend_value(std::span<const int> u, const ExponentVector& theta,
                   const CoefficientVector& beta);

// Checks per-dimension bounds and delta-separation of a candidate h.
ValidationReport validate_theta(const ExponentVector& h, const ParamSpace& space);

// Advances a multi-index over {1..n_1} x ... x {1..n_d} in row-major order
// (last dimension fastest). Returns false after the final site.
bool next_site(std::span<const int> extents, std::vector<int>& u);

}  // namespace powertrend
