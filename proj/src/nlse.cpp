#include "powertrend/nlse.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "powertrend/design.hpp"
#include "powertrend/errors.hpp"

namespace powertrend {

void FitOptions::validate() const {
    if (coarse_resolution < 2)
        throw std::invalid_argument("FitOptions: coarse_resolution must be >= 2");
    if (multistart < 1) throw std::invalid_argument("FitOptions: multistart must be >= 1");
    if (!(tolerance > 0)) throw std::invalid_argument("FitOptions: tolerance must be > 0");
    if (max_iterations < 1)
        throw std::invalid_argument("FitOptions: max_iterations must be >= 1");
    if (!(condition_threshold > 1))
        throw std::invalid_argument("FitOptions: condition_threshold must be > 1");
}

namespace {

using FlatPoint = std::vector<double>;

// Clamp to the box, then restore delta-gaps: offenders shift upward, and a
// breach of the upper bound walks back down. The box always has room since
// upper - lower >= (p_i - 1) * delta.
void project_feasible(FlatPoint& x, const ModelSpec& spec, const ParamSpace& space) {
    std::size_t pos = 0;
    for (int i = 0; i < spec.d; ++i) {
        const int pi = spec.p_per_dim[i];
        const double lo = space.lower[i];
        const double hi = space.upper[i];
        for (int j = 0; j < pi; ++j)
            x[pos + j] = std::clamp(x[pos + j], lo, hi);
        for (int j = 1; j < pi; ++j)
            x[pos + j] = std::max(x[pos + j], x[pos + j - 1] + space.delta);
        if (pi > 0 && x[pos + pi - 1] > hi) {
            x[pos + pi - 1] = hi;
            for (int j = pi - 1; j > 0; --j)
                x[pos + j - 1] = std::min(x[pos + j - 1], x[pos + j] - space.delta);
        }
        pos += pi;
    }
}

// Strictly increasing index combinations whose grid values keep the
// delta-separation; emitted in lexicographic order.
void feasible_tuples(const std::vector<double>& values, int count, double delta,
                     std::vector<std::vector<double>>& out) {
    std::vector<int> idx(count);
    std::function<void(int, int)> rec = [&](int slot, int start) {
        if (slot == count) {
            std::vector<double> tuple(count);
            for (int j = 0; j < count; ++j) tuple[j] = values[idx[j]];
            out.push_back(std::move(tuple));
            return;
        }
        for (int k = start; k < static_cast<int>(values.size()); ++k) {
            if (slot > 0 && values[k] - values[idx[slot - 1]] < delta) continue;
            idx[slot] = k;
            rec(slot + 1, k + 1);
        }
    };
    if (count == 0) {
        out.push_back({});
        return;
    }
    rec(0, 0);
}

struct Objective {
    const LatticeGrid& grid;
    const ModelSpec& spec;
    const ParamSpace& space;
    double condition_threshold;
    long long n_evals = 0;
    long long gram_failures = 0;

    // Best feasible point seen across every evaluation.
    FlatPoint best_point;
    double best_value = std::numeric_limits<double>::infinity();

    Objective(const LatticeGrid& g, const ModelSpec& sp, const ParamSpace& sc, double thr)
        : grid(g), spec(sp), space(sc), condition_threshold(thr) {}

    void record(const FlatPoint& x, double value) {
        if (value < best_value) {
            best_value = value;
            best_point = x;
        }
    }

    double operator()(const FlatPoint& raw) {
        FlatPoint x = raw;
        project_feasible(x, spec, space);
        ++n_evals;
        double value;
        try {
            value = profile_rss(ExponentVector::from_flat(x, spec), grid,
                                condition_threshold);
        } catch (const NearSingularGram&) {
            ++gram_failures;
            return std::numeric_limits<double>::infinity();
        }
        record(x, value);
        return value;
    }
};

struct NmResult {
    FlatPoint x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// Nelder-Mead with standard coefficients; runs until the simplex collapses
// below tol in every coordinate or the iteration budget is spent.
NmResult nelder_mead(Objective& obj, FlatPoint start, double initial_step, double tol,
                     int max_iterations) {
    const int n = static_cast<int>(start.size());
    struct Vertex {
        FlatPoint x;
        double f;
    };
    std::vector<Vertex> simplex;
    simplex.reserve(n + 1);
    simplex.push_back({start, obj(start)});
    for (int a = 0; a < n; ++a) {
        FlatPoint v = start;
        v[a] += initial_step;
        simplex.push_back({v, obj(v)});
    }

    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
    bool hit_tol = false;
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::stable_sort(simplex.begin(), simplex.end(),
                         [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        double spread = 0.0;
        for (int k = 1; k <= n; ++k)
            for (int a = 0; a < n; ++a)
                spread = std::max(spread, std::abs(simplex[k].x[a] - simplex[0].x[a]));
        if (spread < tol) {
            hit_tol = true;
            break;
        }

        FlatPoint centroid(n, 0.0);
        for (int k = 0; k < n; ++k)
            for (int a = 0; a < n; ++a) centroid[a] += simplex[k].x[a] / n;

        auto affine = [&](double t, const FlatPoint& far) {
            FlatPoint v(n);
            for (int a = 0; a < n; ++a) v[a] = centroid[a] + t * (centroid[a] - far[a]);
            return v;
        };

        const FlatPoint reflected = affine(alpha, simplex[n].x);
        const double fr = obj(reflected);
        if (fr < simplex[0].f) {
            const FlatPoint expanded = affine(gamma, simplex[n].x);
            const double fe = obj(expanded);
            simplex[n] = fe < fr ? Vertex{expanded, fe} : Vertex{reflected, fr};
            continue;
        }
        if (fr < simplex[n - 1].f) {
            simplex[n] = {reflected, fr};
            continue;
        }
        const FlatPoint contracted = affine(-rho, simplex[n].x);
        const double fc = obj(contracted);
        if (fc < simplex[n].f) {
            simplex[n] = {contracted, fc};
            continue;
        }
        for (int k = 1; k <= n; ++k) {
            for (int a = 0; a < n; ++a)
                simplex[k].x[a] = simplex[0].x[a] + sigma * (simplex[k].x[a] - simplex[0].x[a]);
            simplex[k].f = obj(simplex[k].x);
        }
    }
    std::stable_sort(simplex.begin(), simplex.end(),
                     [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    return {simplex[0].x, simplex[0].f, hit_tol};
}

// Refinement ladder: a wide simplex from the seed, then restarts with
// re-inflated simplexes around the incumbent. Restarts recover from
// premature collapse inside the curved valleys the exponent pairs create.
NmResult refine_seed(Objective& obj, FlatPoint start, double coarse_step, double tol,
                     int max_iterations) {
    NmResult cur = nelder_mead(obj, std::move(start), coarse_step / 2.0, tol,
                               max_iterations);
    for (const double step : {0.02, std::max(64.0 * tol, 1e-5)}) {
        NmResult next = nelder_mead(obj, cur.x, step, tol, max_iterations);
        if (next.f <= cur.f) cur = std::move(next);
    }
    return cur;
}

// Variable-projection Levenberg-Marquardt on the profiled objective. The
// residual Jacobian column for exponent h_k is -P_X_perp (log u_i) u_i^{h_k}
// beta_k (Kaufman form), so each step solves a p x p damped system. Power
// regressors are nearly collinear and the profiled landscape develops long
// curved valleys; this descent follows them where a simplex stalls.
NmResult lm_descent(Objective& obj, FlatPoint start, int max_iterations) {
    const ModelSpec& spec = obj.spec;
    const LatticeGrid& grid = obj.grid;
    const int p = spec.total_p();
    const int d = spec.d;
    const long long n_sites = grid.site_count();
    const double sqrt_n = std::sqrt(static_cast<double>(n_sites));

    FlatPoint x = std::move(start);
    project_feasible(x, spec, obj.space);

    auto profile_at = [&](const FlatPoint& point, ProfileResult& out) {
        ++obj.n_evals;
        try {
            out = profile_beta(ExponentVector::from_flat(point, spec), grid,
                               obj.condition_threshold);
        } catch (const NearSingularGram&) {
            ++obj.gram_failures;
            return false;
        }
        obj.record(point, out.rss);
        return true;
    };

    NmResult result;
    ProfileResult prof;
    if (!profile_at(x, prof)) return result;
    result.x = x;
    result.f = prof.rss;

    Eigen::MatrixXd x_scaled(n_sites, p), f_jac(n_sites, p);
    double lambda = 1e-3;
    for (int iter = 0; iter < max_iterations; ++iter) {
        const std::vector<double> beta_flat = prof.beta.flatten();
        std::vector<int> u(d, 1);
        long long row = 0;
        do {
            int col = 0;
            for (int i = 0; i < d; ++i) {
                const double log_u = std::log(static_cast<double>(u[i]));
                for (int j = 0; j < spec.p_per_dim[i]; ++j, ++col) {
                    const double e = x[col];
                    const double pw = std::pow(static_cast<double>(u[i]), e);
                    x_scaled(row, col) =
                        pw / (sqrt_n * std::pow(static_cast<double>(grid.extents[i]), e));
                    f_jac(row, col) = beta_flat[col] * log_u * pw;
                }
            }
            ++row;
        } while (next_site(grid.extents, u));

        Eigen::Map<const Eigen::VectorXd> r(prof.residuals.values.data(), n_sites);
        const Eigen::MatrixXd m_scaled = x_scaled.transpose() * x_scaled;
        const Eigen::MatrixXd a = x_scaled.transpose() * f_jac;
        const Eigen::MatrixXd w = m_scaled.ldlt().solve(a);
        const Eigen::MatrixXd s = f_jac.transpose() * f_jac - a.transpose() * w;
        const Eigen::VectorXd g = f_jac.transpose() * r;

        bool accepted = false;
        double step_norm = 0.0;
        for (int tries = 0; tries < 10; ++tries) {
            Eigen::MatrixXd lhs = s;
            lhs.diagonal() += lambda * s.diagonal();
            const Eigen::VectorXd step = lhs.ldlt().solve(g);
            FlatPoint cand = x;
            for (int k = 0; k < p; ++k) cand[k] += step(k);
            project_feasible(cand, spec, obj.space);
            ProfileResult prof2;
            if (profile_at(cand, prof2) && prof2.rss < result.f) {
                step_norm = 0.0;
                for (int k = 0; k < p; ++k)
                    step_norm = std::max(step_norm, std::abs(cand[k] - x[k]));
                x = std::move(cand);
                prof = std::move(prof2);
                result.x = x;
                const double prev = result.f;
                result.f = prof.rss;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (step_norm < 1e-9 || prev - result.f <= 1e-12 * (1.0 + prev))
                    return result;
                break;
            }
            lambda *= 8.0;
        }
        if (!accepted) break;
    }
    return result;
}

}  // namespace

FitResult fit(const LatticeGrid& grid, const ModelSpec& spec, const ParamSpace& space,
              const FitOptions& opts) {
    spec.validate();
    space.validate(spec);
    grid.validate();
    opts.validate();
    if (static_cast<int>(grid.extents.size()) != spec.d)
        throw std::invalid_argument("fit: grid dimension mismatch");
    for (int i = 0; i < spec.d; ++i)
        if (spec.p_per_dim[i] >= 1 && grid.extents[i] < 2)
            throw std::invalid_argument("fit: extents must be >= 2 where p_i >= 1");
    const int p = spec.total_p();
    if (grid.site_count() <= 2 * p)
        throw InsufficientData("fit: need N > 2p observations");

    // Coarse delta-feasible product grid, lexicographic order.
    std::vector<std::vector<std::vector<double>>> dim_tuples(spec.d);
    for (int i = 0; i < spec.d; ++i) {
        std::vector<double> values(opts.coarse_resolution);
        for (int k = 0; k < opts.coarse_resolution; ++k)
            values[k] = space.lower[i] + (space.upper[i] - space.lower[i]) * k /
                                             (opts.coarse_resolution - 1);
        feasible_tuples(values, spec.p_per_dim[i], space.delta, dim_tuples[i]);
        if (dim_tuples[i].empty())
            throw std::invalid_argument("fit: coarse grid admits no feasible tuple");
    }

    Objective obj(grid, spec, space, opts.condition_threshold);

    struct Seed {
        FlatPoint x;
        double f;
        long long order;
    };
    std::vector<Seed> seeds;
    std::vector<int> cursor(spec.d, 0);
    long long scanned = 0;
    bool more = true;
    while (more) {
        FlatPoint x;
        x.reserve(p);
        for (int i = 0; i < spec.d; ++i) {
            const auto& t = dim_tuples[i][cursor[i]];
            x.insert(x.end(), t.begin(), t.end());
        }
        const double f = obj(x);
        if (std::isfinite(f)) seeds.push_back({std::move(x), f, scanned});
        ++scanned;
        more = false;
        for (int i = spec.d - 1; i >= 0; --i) {
            if (++cursor[i] < static_cast<int>(dim_tuples[i].size())) {
                more = true;
                break;
            }
            cursor[i] = 0;
        }
    }
    if (seeds.empty())
        throw AllGridPointsSingular("fit: every feasible coarse point was near singular");

    std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) {
        if (a.f != b.f) return a.f < b.f;
        return a.order < b.order;  // lowest lexicographic h wins ties
    });

    double coarse_step = 0.0;
    for (int i = 0; i < spec.d; ++i)
        coarse_step = std::max(coarse_step, (space.upper[i] - space.lower[i]) /
                                                (opts.coarse_resolution - 1));

    // Short damped-Gauss-Newton descent from every feasible coarse point.
    // The coarse ranking is a poor guide in the collinear-power landscape
    // (a basin's rim can score worse than a distant valley floor), so each
    // point gets to slide downhill before the ranking is trusted.
    std::vector<Seed> descended;
    descended.reserve(seeds.size());
    for (const Seed& s : seeds) {
        const NmResult lm = lm_descent(obj, s.x, 12);
        descended.push_back(
            {std::isfinite(lm.f) ? lm.x : s.x, std::isfinite(lm.f) ? lm.f : s.f, s.order});
    }
    std::stable_sort(descended.begin(), descended.end(), [](const Seed& a, const Seed& b) {
        if (a.f != b.f) return a.f < b.f;
        return a.order < b.order;
    });

    // Multistart selection with basin diversity: walk the candidates in
    // ascending objective order and keep one per grid-step-sized
    // neighborhood, so the multistarts do not all crowd the same valley.
    std::vector<const Seed*> starts;
    for (const Seed& cand : descended) {
        if (static_cast<int>(starts.size()) >= opts.multistart) break;
        bool distinct = true;
        for (const Seed* kept : starts) {
            double dist = 0.0;
            for (int a = 0; a < p; ++a)
                dist = std::max(dist, std::abs(cand.x[a] - kept->x[a]));
            if (dist < coarse_step * 1.5) {
                distinct = false;
                break;
            }
        }
        if (distinct) starts.push_back(&cand);
    }

    for (const Seed* s : starts) {
        lm_descent(obj, s->x, 60);
        refine_seed(obj, s->x, coarse_step, opts.tolerance, opts.max_iterations);
    }

    // Final polish from the overall best point; its tolerance exit defines
    // convergence of the fit.
    const NmResult polish =
        nelder_mead(obj, obj.best_point, std::max(64.0 * opts.tolerance, 1e-5),
                    opts.tolerance, opts.max_iterations);
    const bool converged = polish.converged;

    FitResult result;
    result.theta_hat = ExponentVector::from_flat(obj.best_point, spec);
    const ProfileResult prof =
        profile_beta(result.theta_hat, grid, opts.condition_threshold);
    result.beta_hat = prof.beta;
    result.rss = prof.rss;
    result.sigma2_hat = prof.rss / static_cast<double>(grid.site_count());
    result.n_evals = obj.n_evals;
    result.converged = converged;
    result.gram_condition = prof.system.condition;

    int near_zero = 0;
    for (const auto& dim : result.theta_hat.dims)
        for (double e : dim)
            if (std::abs(e) < 1e-3) ++near_zero;
    if (near_zero >= 2)
        result.warnings.push_back(
            "two or more estimated exponents are within 1e-3 of zero; the model "
            "admits at most one vanishing exponent");
    return result;
}

CoefficientVector lse_known_theta(const LatticeGrid& grid, const ExponentVector& theta,
                                  double condition_threshold) {
    return profile_beta(theta, grid, condition_threshold).beta;
}

}  // namespace powertrend
