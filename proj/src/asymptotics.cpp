#include "powertrend/asymptotics.hpp"

#include <cmath>
#include <stdexcept>

#include "powertrend/errors.hpp"

namespace powertrend {

namespace {

constexpr double kFormulaEps = 1e-12;

std::vector<int> block_offsets(const ExponentVector& v) {
    std::vector<int> off(v.dims.size() + 1, 0);
    for (std::size_t i = 0; i < v.dims.size(); ++i)
        off[i + 1] = off[i] + static_cast<int>(v.dims[i].size());
    return off;
}

void check_exponents(const ExponentVector& theta) {
    for (const auto& dim : theta.dims)
        for (double e : dim)
            if (e <= -0.5)
                throw std::invalid_argument("limit matrices need exponents > -1/2");
}

// Inverse of the Cauchy matrix with entries 1/(1 + v_j + v_k) for distinct
// nodes; the classical product formula.
Eigen::MatrixXd cauchy_inverse(const std::vector<double>& v) {
    const int r = static_cast<int>(v.size());
    Eigen::MatrixXd inv(r, r);
    for (int k = 0; k < r; ++k) {
        for (int l = 0; l < r; ++l) {
            double num = 1.0, den = 1.0 + v[k] + v[l];
            for (int m = 0; m < r; ++m) num *= (1.0 + v[k] + v[m]) * (1.0 + v[l] + v[m]);
            for (int m = 0; m < r; ++m) {
                if (m != k) den *= v[k] - v[m];
                if (m != l) den *= v[l] - v[m];
            }
            inv(k, l) = num / den;
        }
    }
    return inv;
}

// Nonzero-exponent block inverse: per-dimension Cauchy inverses plus the
// rank-one coupling correction. Flat order must match the canonical
// stacking of the active dimensions.
Eigen::MatrixXd block_inverse_nonzero(const std::vector<std::vector<double>>& dims) {
    const int d = static_cast<int>(dims.size());
    std::vector<int> off(d + 1, 0);
    for (int i = 0; i < d; ++i) off[i + 1] = off[i] + static_cast<int>(dims[i].size());
    const int p = off[d];

    Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(p, p);
    std::vector<double> pi_prod(d);        // prod_m ((1+v)/v)^2 = 1/(1-tau_i)
    std::vector<Eigen::VectorXd> w(d);     // (1-tau_i)^-1 T_ii^-1 t_i in closed form
    for (int i = 0; i < d; ++i) {
        const auto& v = dims[i];
        const int r = static_cast<int>(v.size());
        double prod = 1.0;
        for (double e : v) {
            const double q = (1.0 + e) / e;
            prod *= q * q;
        }
        pi_prod[i] = prod;
        w[i].resize(r);
        for (int k = 0; k < r; ++k) {
            double acc = (1.0 + 2.0 * v[k]) * (1.0 + v[k]) / (v[k] * v[k]);
            for (int m = 0; m < r; ++m) {
                if (m == k) continue;
                acc *= (1.0 + v[k] + v[m]) * (1.0 + v[m]) / ((v[m] - v[k]) * v[m]);
            }
            w[i](k) = acc;
        }
        inv.block(off[i], off[i], r, r) = cauchy_inverse(v);
    }

    double one_plus_sigma = 1.0 - d;
    for (int i = 0; i < d; ++i) one_plus_sigma += pi_prod[i];

    for (int i = 0; i < d; ++i) {
        const int ri = off[i + 1] - off[i];
        double sum_other = 0.0;
        for (int s = 0; s < d; ++s)
            if (s != i) sum_other += pi_prod[s] - 1.0;
        if (sum_other != 0.0) {
            const double c = sum_other / (pi_prod[i] * one_plus_sigma);
            inv.block(off[i], off[i], ri, ri) += c * (w[i] * w[i].transpose());
        }
        for (int j = i + 1; j < d; ++j) {
            const int rj = off[j + 1] - off[j];
            const Eigen::MatrixXd blk = -(w[i] * w[j].transpose()) / one_plus_sigma;
            inv.block(off[i], off[j], ri, rj) = blk;
            inv.block(off[j], off[i], rj, ri) = blk.transpose();
        }
    }
    return inv;
}

Eigen::MatrixXd generic_inverse(const Eigen::MatrixXd& m) {
    return m.fullPivLu().inverse();
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

Eigen::MatrixXd phi_matrix(const ExponentVector& g, const ExponentVector& h) {
    if (!g.same_shape(h)) throw std::invalid_argument("phi_matrix: shapes differ");
    check_exponents(g);
    check_exponents(h);
    const int d = static_cast<int>(g.dims.size());
    const auto off = block_offsets(g);
    const int p = off[d];
    Eigen::MatrixXd phi(p, p);
    for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) {
            for (std::size_t j = 0; j < g.dims[i].size(); ++j) {
                for (std::size_t l = 0; l < h.dims[k].size(); ++l) {
                    const double gij = g.dims[i][j];
                    const double hkl = h.dims[k][l];
                    const double entry = (i == k)
                                             ? 1.0 / (gij + hkl + 1.0)
                                             : 1.0 / ((gij + 1.0) * (hkl + 1.0));
                    phi(off[i] + static_cast<int>(j), off[k] + static_cast<int>(l)) = entry;
                }
            }
        }
    }
    return phi;
}

Eigen::MatrixXd cauchy_block_inverse(const ExponentVector& theta) {
    check_exponents(theta);
    const auto off = block_offsets(theta);
    const int d = static_cast<int>(theta.dims.size());
    const int p = off[d];
    if (p < 1) throw std::invalid_argument("cauchy_block_inverse: empty exponent vector");

    int zero_flat = -1;
    for (int i = 0; i < d; ++i) {
        const auto& v = theta.dims[i];
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (std::abs(v[j]) < kFormulaEps) {
                if (zero_flat >= 0)
                    throw FormulaSingularity("two zero exponents: Phi is singular");
                zero_flat = off[i] + static_cast<int>(j);
            }
            if (std::abs(1.0 + 2.0 * v[j]) < kFormulaEps)
                throw FormulaSingularity("exponent too close to -1/2");
            for (std::size_t m = j + 1; m < v.size(); ++m)
                if (std::abs(v[j] - v[m]) < kFormulaEps)
                    throw FormulaSingularity("coincident exponents within a dimension");
        }
    }

    if (zero_flat < 0) {
        std::vector<std::vector<double>> active;
        for (const auto& v : theta.dims)
            if (!v.empty()) active.push_back(v);
        // Re-expand over empty dimensions is a no-op: they host no rows.
        return block_inverse_nonzero(active);
    }

    // Bordered case: permute the zero-exponent row/column last, invert the
    // nonzero core, and fold the border back in closed form.
    std::vector<std::vector<double>> reduced;
    std::vector<int> map_full_to_reduced(p, -1);
    int pos = 0;
    for (int i = 0; i < d; ++i) {
        std::vector<double> keep;
        for (std::size_t j = 0; j < theta.dims[i].size(); ++j) {
            const int flat = off[i] + static_cast<int>(j);
            if (flat == zero_flat) continue;
            keep.push_back(theta.dims[i][j]);
            map_full_to_reduced[flat] = pos++;
        }
        if (!keep.empty()) reduced.push_back(std::move(keep));
    }
    const int r = p - 1;

    double one_plus_sigma = 1.0 - static_cast<double>(reduced.size());
    for (const auto& v : reduced) {
        double prod = 1.0;
        for (double e : v) {
            const double q = (1.0 + e) / e;
            prod *= q * q;
        }
        one_plus_sigma += prod;
    }
    if (reduced.empty()) one_plus_sigma = 1.0;  // lone intercept: Phi = [1]

    Eigen::MatrixXd core(0, 0);
    Eigen::VectorXd t(r), core_t(r);
    if (r > 0) {
        core = block_inverse_nonzero(reduced);
        int k = 0;
        for (const auto& v : reduced)
            for (double e : v) t(k++) = 1.0 / (1.0 + e);
        core_t = core * t;
    }

    Eigen::MatrixXd inv(p, p);
    inv(zero_flat, zero_flat) = one_plus_sigma;
    for (int a = 0; a < p; ++a) {
        if (a == zero_flat) continue;
        const int ra = map_full_to_reduced[a];
        inv(a, zero_flat) = -one_plus_sigma * core_t(ra);
        inv(zero_flat, a) = inv(a, zero_flat);
        for (int b = 0; b < p; ++b) {
            if (b == zero_flat) continue;
            const int rb = map_full_to_reduced[b];
            inv(a, b) = core(ra, rb) + one_plus_sigma * core_t(ra) * core_t(rb);
        }
    }
    return inv;
}

LimitMatrices limit_matrices(const ExponentVector& theta, const CoefficientVector& beta) {
    check_exponents(theta);
    if (theta.dims.size() != beta.dims.size())
        throw std::invalid_argument("limit_matrices: theta/beta dimension mismatch");
    for (std::size_t i = 0; i < theta.dims.size(); ++i)
        if (theta.dims[i].size() != beta.dims[i].size())
            throw std::invalid_argument("limit_matrices: theta/beta shape mismatch");

    const int d = static_cast<int>(theta.dims.size());
    const auto off = block_offsets(theta);
    const int p = off[d];

    LimitMatrices lm;
    lm.phi.resize(d);
    for (int i = 0; i < d; ++i) {
        lm.phi[i].resize(static_cast<int>(theta.dims[i].size()));
        for (std::size_t j = 0; j < theta.dims[i].size(); ++j)
            lm.phi[i](static_cast<int>(j)) = 1.0 / (theta.dims[i][j] + 1.0);
    }

    lm.Phi = phi_matrix(theta, theta);
    lm.PhiPlus.resize(p, p);
    lm.PhiPlusPlus.resize(p, p);
    for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) {
            for (std::size_t j = 0; j < theta.dims[i].size(); ++j) {
                for (std::size_t l = 0; l < theta.dims[k].size(); ++l) {
                    const int a = off[i] + static_cast<int>(j);
                    const int b = off[k] + static_cast<int>(l);
                    if (i == k) {
                        const double c = theta.dims[i][j] + theta.dims[i][l] + 1.0;
                        lm.PhiPlus(a, b) = 1.0 / (c * c);
                        lm.PhiPlusPlus(a, b) = 2.0 / (c * c * c);
                    } else {
                        const double fi = lm.phi[i](static_cast<int>(j));
                        const double fk = lm.phi[k](static_cast<int>(l));
                        lm.PhiPlus(a, b) = fi * fk * fk;
                        lm.PhiPlusPlus(a, b) = fi * fi * fk * fk;
                    }
                }
            }
        }
    }

    Eigen::MatrixXd phi_inv;
    try {
        phi_inv = cauchy_block_inverse(theta);
    } catch (const FormulaSingularity&) {
        phi_inv = generic_inverse(lm.Phi);
    }
    lm.Upsilon = lm.PhiPlusPlus - lm.PhiPlus.transpose() * phi_inv * lm.PhiPlus;
    lm.Upsilon = ((lm.Upsilon + lm.Upsilon.transpose()) / 2.0).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(lm.Upsilon);
    if (llt.info() != Eigen::Success)
        throw DegenerateUpsilon("Upsilon not positive definite: exponents too close");

    lm.beta_diag.resize(p);
    const std::vector<double> beta_flat = beta.flatten();
    for (int a = 0; a < p; ++a) {
        if (beta_flat[a] == 0.0)
            throw std::invalid_argument("limit_matrices: beta entries must be nonzero");
        lm.beta_diag(a) = beta_flat[a];
    }
    lm.B.resize(p, 2 * p);
    lm.B << lm.beta_diag.cwiseInverse().asDiagonal().toDenseMatrix(),
        -Eigen::MatrixXd::Identity(p, p);
    return lm;
}

Normings normings(const ExponentVector& theta, std::span<const int> extents) {
    if (theta.dims.size() != extents.size())
        throw std::invalid_argument("normings: dimension mismatch");
    const auto off = block_offsets(theta);
    const int p = off[theta.dims.size()];
    double n_total = 1.0;
    for (int e : extents) {
        if (e < 2) throw std::invalid_argument("normings: extents must be >= 2");
        n_total *= e;
    }
    Normings nm;
    nm.D.resize(p);
    nm.L.resize(p);
    const double sqrt_n = std::sqrt(n_total);
    for (std::size_t i = 0; i < theta.dims.size(); ++i) {
        for (std::size_t j = 0; j < theta.dims[i].size(); ++j) {
            const int a = off[i] + static_cast<int>(j);
            nm.D(a) = sqrt_n * std::pow(static_cast<double>(extents[i]), theta.dims[i][j]);
            nm.L(a) = std::log(static_cast<double>(extents[i]));
        }
    }
    return nm;
}

InferenceReport covariance(const FitResult& fit, std::span<const int> extents,
                           double two_pi_f0) {
    if (!(two_pi_f0 > 0)) throw std::invalid_argument("covariance: 2piF(0) must be > 0");
    const LimitMatrices lm = limit_matrices(fit.theta_hat, fit.beta_hat);
    const int p = static_cast<int>(lm.beta_diag.size());
    const Normings nm = normings(fit.theta_hat, extents);

    const Eigen::MatrixXd upsilon_inv =
        Eigen::LLT<Eigen::MatrixXd>(lm.Upsilon).solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::VectorXd binv = lm.beta_diag.cwiseInverse();

    Eigen::MatrixXd k(2 * p, 2 * p);  // B' Upsilon^-1 B
    k.topLeftCorner(p, p) = binv.asDiagonal() * upsilon_inv * binv.asDiagonal();
    k.topRightCorner(p, p) = -(binv.asDiagonal() * upsilon_inv);
    k.bottomLeftCorner(p, p) = k.topRightCorner(p, p).transpose();
    k.bottomRightCorner(p, p) = upsilon_inv;

    // Unnormalize: Cov = 2piF(0) (L+ D+^-1) K (D+^-1 L+), all diagonal scales.
    Eigen::VectorXd s(2 * p);
    for (int a = 0; a < p; ++a) {
        s(a) = 1.0 / nm.D(a);
        s(p + a) = nm.L(a) / nm.D(a);
    }
    InferenceReport rep;
    rep.p = p;
    rep.two_pi_f0 = two_pi_f0;
    rep.covariance = two_pi_f0 * (s.asDiagonal() * k * s.asDiagonal());

    const std::vector<double> th = fit.theta_hat.flatten();
    const std::vector<double> be = fit.beta_hat.flatten();
    const auto off = block_offsets(fit.theta_hat);
    rep.params.resize(2 * p);
    for (std::size_t i = 0; i < fit.theta_hat.dims.size(); ++i) {
        for (std::size_t j = 0; j < fit.theta_hat.dims[i].size(); ++j) {
            const int a = off[i] + static_cast<int>(j);
            const std::string suffix =
                std::to_string(i + 1) + "_" + std::to_string(j + 1);
            rep.params[a].name = "theta" + suffix;
            rep.params[a].estimate = th[a];
            rep.params[p + a].name = "beta" + suffix;
            rep.params[p + a].estimate = be[a];
        }
    }
    for (int a = 0; a < 2 * p; ++a) {
        const double var = rep.covariance(a, a);
        rep.params[a].se = var > 0 ? std::sqrt(var) : 0.0;
        rep.params[a].ci95 = {rep.params[a].estimate - kCrit5 * rep.params[a].se,
                              rep.params[a].estimate + kCrit5 * rep.params[a].se};
    }
    return rep;
}

Eigen::MatrixXd lse_covariance(const ExponentVector& theta, std::span<const int> extents,
                               double two_pi_f0) {
    if (!(two_pi_f0 > 0)) throw std::invalid_argument("lse_covariance: 2piF(0) must be > 0");
    check_exponents(theta);
    Eigen::MatrixXd phi_inv;
    try {
        phi_inv = cauchy_block_inverse(theta);
    } catch (const FormulaSingularity&) {
        phi_inv = generic_inverse(phi_matrix(theta, theta));
    }
    const Normings nm = normings(theta, extents);
    const Eigen::VectorXd dinv = nm.D.cwiseInverse();
    return two_pi_f0 * (dinv.asDiagonal() * phi_inv * dinv.asDiagonal());
}

WaldResult wald_test(const InferenceReport& report, int index, double null_value) {
    if (index < 0 || index >= static_cast<int>(report.params.size()))
        throw std::invalid_argument("wald_test: index out of range");
    if (index >= report.p && null_value == 0.0)
        throw ZeroNullForBeta("zero restrictions on beta are untestable in this model");
    const auto& par = report.params[index];
    if (!(par.se > 0)) throw std::invalid_argument("wald_test: standard error must be > 0");
    WaldResult res;
    res.z = (par.estimate - null_value) / par.se;
    res.p_value = normal_two_sided_p(res.z);
    return res;
}

}  // namespace powertrend
