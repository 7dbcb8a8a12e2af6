#include "powertrend/design.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "powertrend/errors.hpp"

namespace powertrend {

namespace {

void check_shapes(const ExponentVector& g, const ExponentVector& h,
                  std::span<const int> extents) {
    if (!g.same_shape(h)) throw std::invalid_argument("gram: exponent shapes differ");
    if (g.dims.size() != extents.size())
        throw std::invalid_argument("gram: extents dimension mismatch");
    for (int e : extents)
        if (e < 1) throw std::invalid_argument("gram: extents must be positive");
}

// sum_{u=1}^{n} u^a
double power_sum(int n, double a) {
    double s = 0.0;
    for (int u = 1; u <= n; ++u) s += std::pow(static_cast<double>(u), a);
    return s;
}

// (1/n) sum_{u=1}^{n} (u/n)^a, the normalized average with limit 1/(a+1)
double scaled_power_sum(int n, double a) {
    double s = 0.0;
    const double inv_n = 1.0 / n;
    for (int u = 1; u <= n; ++u) s += std::pow(u * inv_n, a);
    return s * inv_n;
}

// Offset of dimension i's block in the canonical stacking order.
std::vector<int> block_offsets(const ExponentVector& h) {
    std::vector<int> off(h.dims.size() + 1, 0);
    for (std::size_t i = 0; i < h.dims.size(); ++i)
        off[i + 1] = off[i] + static_cast<int>(h.dims[i].size());
    return off;
}

}  // namespace

Eigen::MatrixXd gram_matrix(const ExponentVector& g, const ExponentVector& h,
                            std::span<const int> extents) {
    check_shapes(g, h, extents);
    const int d = static_cast<int>(extents.size());
    const auto off = block_offsets(g);
    const int p = off[d];

    double n_total = 1.0;
    for (int e : extents) n_total *= e;

    // 1-D sums S_i(a) for the exponents that actually occur.
    auto sums_for = [&](const std::vector<std::vector<double>>& dims, int i) {
        std::vector<double> s(dims[i].size());
        for (std::size_t j = 0; j < dims[i].size(); ++j)
            s[j] = power_sum(extents[i], dims[i][j]);
        return s;
    };

    Eigen::MatrixXd M(p, p);
    for (int i = 0; i < d; ++i) {
        const auto g_sums = sums_for(g.dims, i);
        for (int k = 0; k < d; ++k) {
            const auto h_sums = sums_for(h.dims, k);
            for (std::size_t j = 0; j < g.dims[i].size(); ++j) {
                for (std::size_t l = 0; l < h.dims[k].size(); ++l) {
                    double entry;
                    if (i == k) {
                        // sum_u u_i^{g_ij + h_il} times the other extents
                        entry = power_sum(extents[i], g.dims[i][j] + h.dims[i][l]) *
                                (n_total / extents[i]);
                    } else {
                        entry = g_sums[j] * h_sums[l] *
                                (n_total /
                                 (static_cast<double>(extents[i]) * extents[k]));
                    }
                    M(off[i] + static_cast<int>(j), off[k] + static_cast<int>(l)) = entry;
                }
            }
        }
    }
    return M;
}

Eigen::MatrixXd scaled_gram(const ExponentVector& h, std::span<const int> extents) {
    check_shapes(h, h, extents);
    const int d = static_cast<int>(extents.size());
    const auto off = block_offsets(h);
    const int p = off[d];

    Eigen::MatrixXd M(p, p);
    for (int i = 0; i < d; ++i) {
        std::vector<double> si(h.dims[i].size());
        for (std::size_t j = 0; j < h.dims[i].size(); ++j)
            si[j] = scaled_power_sum(extents[i], h.dims[i][j]);
        for (int k = i; k < d; ++k) {
            for (std::size_t j = 0; j < h.dims[i].size(); ++j) {
                for (std::size_t l = 0; l < h.dims[k].size(); ++l) {
                    double entry;
                    if (i == k) {
                        entry = scaled_power_sum(extents[i], h.dims[i][j] + h.dims[i][l]);
                    } else {
                        entry = si[j] * scaled_power_sum(extents[k], h.dims[k][l]);
                    }
                    M(off[i] + static_cast<int>(j), off[k] + static_cast<int>(l)) = entry;
                    M(off[k] + static_cast<int>(l), off[i] + static_cast<int>(j)) = entry;
                }
            }
        }
    }
    return M;
}

ProfileResult profile_beta(const ExponentVector& h, const LatticeGrid& grid,
                           double condition_threshold) {
    grid.validate();
    if (h.dims.size() != grid.extents.size())
        throw std::invalid_argument("profile_beta: dimension mismatch");
    const int d = static_cast<int>(grid.extents.size());
    const auto off = block_offsets(h);
    const int p = off[d];
    if (p < 1) throw std::invalid_argument("profile_beta: no regressors");
    const double n_total = static_cast<double>(grid.site_count());
    const double sqrt_n = std::sqrt(n_total);

    // Scaled regressor tables (u_i/n_i)^{h_ij}, one column per exponent.
    std::vector<std::vector<double>> table(p);
    Eigen::VectorXd scale(p);
    for (int i = 0; i < d; ++i) {
        const int n_i = grid.extents[i];
        for (std::size_t j = 0; j < h.dims[i].size(); ++j) {
            const double e = h.dims[i][j];
            auto& col = table[off[i] + static_cast<int>(j)];
            col.resize(n_i);
            for (int u = 1; u <= n_i; ++u)
                col[u - 1] = std::pow(static_cast<double>(u) / n_i, e);
            scale(off[i] + static_cast<int>(j)) = sqrt_n * std::pow(static_cast<double>(n_i), e);
        }
    }

    // Scaled right-hand side: N^{-1/2} sum_u (u_i/n_i)^{h_ij} y_u.
    Eigen::VectorXd rhs_scaled = Eigen::VectorXd::Zero(p);
    std::vector<int> u(d, 1);
    std::size_t idx = 0;
    do {
        const double y = grid.values[idx++];
        for (int i = 0; i < d; ++i) {
            const int base = off[i];
            const int cnt = off[i + 1] - base;
            for (int j = 0; j < cnt; ++j) rhs_scaled(base + j) += table[base + j][u[i] - 1] * y;
        }
    } while (next_site(grid.extents, u));
    rhs_scaled /= sqrt_n;

    const Eigen::MatrixXd m_scaled = scaled_gram(h, grid.extents);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m_scaled);
    if (eig.info() != Eigen::Success)
        throw NearSingularGram("profile_beta: eigen decomposition failed");
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lmax = lambda(p - 1);
    const double lmin = lambda(0);
    const double condition = (lmin > 0.0) ? lmax / lmin
                                          : std::numeric_limits<double>::infinity();
    if (!(condition < condition_threshold))
        throw NearSingularGram("profile_beta: scaled Gram condition " +
                               std::to_string(condition) + " exceeds threshold");

    const Eigen::VectorXd z =
        eig.eigenvectors() *
        (eig.eigenvectors().transpose() * rhs_scaled).cwiseQuotient(lambda);

    ProfileResult result;
    const Eigen::VectorXd beta_flat = z.cwiseQuotient(scale);
    ModelSpec spec;
    spec.d = d;
    spec.p_per_dim.resize(d);
    for (int i = 0; i < d; ++i) spec.p_per_dim[i] = off[i + 1] - off[i];
    result.beta = CoefficientVector::from_flat(
        std::span<const double>(beta_flat.data(), static_cast<std::size_t>(p)), spec);

    result.system.M = gram_matrix(h, h, grid.extents);
    result.system.rhs = rhs_scaled.cwiseProduct(scale);
    result.system.scale = scale;
    result.system.condition = condition;

    // Residuals via the scaled tables: fitted value = sum_k z_k N^{-1/2} (u_i/n_i)^{h}.
    result.residuals.extents = grid.extents;
    result.residuals.values.resize(grid.values.size());
    std::fill(u.begin(), u.end(), 1);
    idx = 0;
    double rss = 0.0;
    do {
        double fitted = 0.0;
        for (int i = 0; i < d; ++i) {
            const int base = off[i];
            const int cnt = off[i + 1] - base;
            for (int j = 0; j < cnt; ++j) fitted += z(base + j) * table[base + j][u[i] - 1];
        }
        fitted /= sqrt_n;
        const double r = grid.values[idx] - fitted;
        result.residuals.values[idx] = r;
        rss += r * r;
        ++idx;
    } while (next_site(grid.extents, u));
    result.rss = rss;
    return result;
}

double profile_rss(const ExponentVector& h, const LatticeGrid& grid,
                   double condition_threshold) {
    return profile_beta(h, grid, condition_threshold).rss;
}

}  // namespace powertrend
