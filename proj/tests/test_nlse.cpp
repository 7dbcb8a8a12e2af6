#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "powertrend/design.hpp"
#include "powertrend/errors.hpp"
#include "powertrend/nlse.hpp"
#include "powertrend/simulate.hpp"

using namespace powertrend;

namespace {

LatticeGrid noiseless_grid(const ExponentVector& theta, const CoefficientVector& beta,
                           const std::vector<int>& extents) {
    LatticeGrid grid;
    grid.extents = extents;
    std::vector<int> u(extents.size(), 1);
    do {
        grid.values.push_back(trend_value(u, theta, beta));
    } while (next_site(extents, u));
    return grid;
}

}  // namespace

TEST_CASE("noiseless planar trend is recovered to high accuracy") {
    ExponentVector theta{{{1.0}, {1.0}}};
    CoefficientVector beta{{{1.0}, {1.0}}};
    const LatticeGrid grid = noiseless_grid(theta, beta, {10, 10});
    ModelSpec spec{2, {1, 1}};
    const FitResult res = fit(grid, spec, ParamSpace::defaults(2));
    CHECK(res.theta_hat.dims[0][0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.theta_hat.dims[1][0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.beta_hat.dims[0][0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.beta_hat.dims[1][0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.converged);
    CHECK(res.rss <= 1e-8);
}

TEST_CASE("noiseless two-term dimension with fractional exponents") {
    ExponentVector theta{{{0.5, 2.0}}};
    CoefficientVector beta{{{3.0, -1.5}}};
    const LatticeGrid grid = noiseless_grid(theta, beta, {40});
    ModelSpec spec{1, {2}};
    const FitResult res = fit(grid, spec, ParamSpace::defaults(1));
    CHECK(res.theta_hat.dims[0][0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(res.theta_hat.dims[0][1] == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(res.beta_hat.dims[0][0] == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(res.beta_hat.dims[0][1] == doctest::Approx(-1.5).epsilon(1e-4));
}

TEST_CASE("fit is deterministic") {
    ExponentVector theta{{{1.0}, {1.0}}};
    CoefficientVector beta{{{1.0}, {1.0}}};
    const LatticeGrid grid =
        gen_dataset(theta, beta, ErrorFieldModel::iid(1.0), std::vector<int>{12, 12}, 99);
    ModelSpec spec{2, {1, 1}};
    const FitResult a = fit(grid, spec, ParamSpace::defaults(2));
    const FitResult b = fit(grid, spec, ParamSpace::defaults(2));
    CHECK(a.theta_hat.dims == b.theta_hat.dims);
    CHECK(a.beta_hat.dims == b.beta_hat.dims);
    CHECK(a.rss == b.rss);
    CHECK(a.n_evals == b.n_evals);
}

TEST_CASE("scaling the data scales beta and fixes theta") {
    ExponentVector theta{{{1.0}, {1.0}}};
    CoefficientVector beta{{{1.0}, {1.0}}};
    LatticeGrid grid =
        gen_dataset(theta, beta, ErrorFieldModel::iid(1.0), std::vector<int>{11, 11}, 7);
    ModelSpec spec{2, {1, 1}};
    const FitResult base = fit(grid, spec, ParamSpace::defaults(2));

    LatticeGrid scaled = grid;
    for (double& v : scaled.values) v *= 3.0;
    const FitResult res = fit(scaled, spec, ParamSpace::defaults(2));
    for (int i = 0; i < 2; ++i) {
        CHECK(res.theta_hat.dims[i][0] ==
              doctest::Approx(base.theta_hat.dims[i][0]).epsilon(1e-4));
        CHECK(res.beta_hat.dims[i][0] ==
              doctest::Approx(3.0 * base.beta_hat.dims[i][0]).epsilon(1e-4));
    }
    CHECK(res.rss == doctest::Approx(9.0 * base.rss).epsilon(1e-6));
}

TEST_CASE("relabeling dimensions permutes the estimate blocks") {
    ExponentVector theta{{{2.0}, {0.5}}};
    CoefficientVector beta{{{1.0}, {1.0}}};
    const std::vector<int> n{9, 13};
    const LatticeGrid grid = gen_dataset(theta, beta, ErrorFieldModel::iid(1.0), n, 41);

    // Transpose the grid.
    LatticeGrid t;
    t.extents = {n[1], n[0]};
    t.values.resize(grid.values.size());
    for (int u1 = 1; u1 <= n[0]; ++u1)
        for (int u2 = 1; u2 <= n[1]; ++u2) {
            const std::vector<int> a{u1, u2}, b{u2, u1};
            t.values[t.flat_index(b)] = grid.values[grid.flat_index(a)];
        }

    ModelSpec spec{2, {1, 1}};
    const FitResult direct = fit(grid, spec, ParamSpace::defaults(2));
    const FitResult swapped = fit(t, spec, ParamSpace::defaults(2));
    CHECK(swapped.theta_hat.dims[0][0] ==
          doctest::Approx(direct.theta_hat.dims[1][0]).epsilon(1e-5));
    CHECK(swapped.theta_hat.dims[1][0] ==
          doctest::Approx(direct.theta_hat.dims[0][0]).epsilon(1e-5));
    CHECK(swapped.beta_hat.dims[0][0] ==
          doctest::Approx(direct.beta_hat.dims[1][0]).epsilon(1e-4));
    CHECK(swapped.rss == doctest::Approx(direct.rss).epsilon(1e-9));
}

TEST_CASE("refined optimum beats every coarse grid point") {
    ExponentVector theta{{{1.3}, {0.8}}};
    CoefficientVector beta{{{1.0}, {2.0}}};
    const LatticeGrid grid =
        gen_dataset(theta, beta, ErrorFieldModel::iid(1.0), std::vector<int>{10, 14}, 3);
    ModelSpec spec{2, {1, 1}};
    const ParamSpace space = ParamSpace::defaults(2);
    const FitOptions opts;
    const FitResult res = fit(grid, spec, space, opts);

    for (int k1 = 0; k1 < opts.coarse_resolution; ++k1) {
        for (int k2 = 0; k2 < opts.coarse_resolution; ++k2) {
            ExponentVector h{{{space.lower[0] + (space.upper[0] - space.lower[0]) * k1 /
                              (opts.coarse_resolution - 1)},
                             {space.lower[1] + (space.upper[1] - space.lower[1]) * k2 /
                              (opts.coarse_resolution - 1)}}};
            CHECK(res.rss <= profile_rss(h, grid) + 1e-9);
        }
    }
}

TEST_CASE("single-seed noisy fit lands near the truth") {
    ExponentVector theta{{{1.0}, {1.0}}};
    CoefficientVector beta{{{1.0}, {1.0}}};
    const LatticeGrid grid =
        gen_dataset(theta, beta, ErrorFieldModel::iid(1.0), std::vector<int>{15, 15}, 1);
    ModelSpec spec{2, {1, 1}};
    const FitResult res = fit(grid, spec, ParamSpace::defaults(2));
    CHECK(res.theta_hat.dims[0][0] == doctest::Approx(1.0).epsilon(0.25));
    CHECK(res.theta_hat.dims[1][0] == doctest::Approx(1.0).epsilon(0.25));
    CHECK(res.sigma2_hat == doctest::Approx(res.rss / 225.0));
}

TEST_CASE("lse with known theta equals the profiled solve and the dense oracle") {
    ExponentVector theta{{{1.0}, {1.0}}};
    CoefficientVector beta{{{1.0}, {1.0}}};
    const LatticeGrid grid =
        gen_dataset(theta, beta, ErrorFieldModel::iid(1.0), std::vector<int>{15, 15}, 12);
    const CoefficientVector tilde = lse_known_theta(grid, theta);
    const Eigen::VectorXd oracle = oracles::dense_lsq(theta, grid);
    const auto flat = tilde.flatten();
    for (int a = 0; a < oracle.size(); ++a)
        CHECK(flat[a] == doctest::Approx(oracle(a)).epsilon(1e-8));

    const LatticeGrid clean = noiseless_grid(theta, beta, {8, 8});
    const auto exact = lse_known_theta(clean, theta).flatten();
    CHECK(exact[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(exact[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("three-dimensional noiseless recovery") {
    ExponentVector theta{{{1.0}, {0.5}, {2.0}}};
    CoefficientVector beta{{{1.0}, {-2.0}, {0.5}}};
    const LatticeGrid grid = noiseless_grid(theta, beta, {6, 7, 8});
    ModelSpec spec{3, {1, 1, 1}};
    const FitResult res = fit(grid, spec, ParamSpace::defaults(3));
    CHECK(res.theta_hat.dims[0][0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(res.theta_hat.dims[1][0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(res.theta_hat.dims[2][0] == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(res.beta_hat.dims[1][0] == doctest::Approx(-2.0).epsilon(1e-5));
}

TEST_CASE("a dimension with zero power terms contributes nothing") {
    // Trend varies only along dimension 2; dimension 1 has p_1 = 0.
    ExponentVector theta{{{}, {1.5}}};
    CoefficientVector beta{{{}, {2.0}}};
    const LatticeGrid grid = noiseless_grid(theta, beta, {4, 18});
    ModelSpec spec{2, {0, 1}};
    const FitResult res = fit(grid, spec, ParamSpace::defaults(2));
    REQUIRE(res.theta_hat.dims[0].empty());
    CHECK(res.theta_hat.dims[1][0] == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(res.beta_hat.dims[1][0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("insufficient data and tiny extents are rejected") {
    ModelSpec spec{1, {2}};
    LatticeGrid grid;
    grid.extents = {4};
    grid.values.assign(4, 1.0);
    CHECK_THROWS_AS(fit(grid, spec, ParamSpace::defaults(1)), InsufficientData);

    ModelSpec spec2{2, {1, 1}};
    LatticeGrid thin;
    thin.extents = {1, 12};
    thin.values.assign(12, 1.0);
    CHECK_THROWS_AS(fit(thin, spec2, ParamSpace::defaults(2)), std::invalid_argument);
}

TEST_CASE("an impossible conditioning threshold fails every grid point") {
    ExponentVector theta{{{0.5, 2.0}}};
    CoefficientVector beta{{{1.0, 1.0}}};
    const LatticeGrid grid = noiseless_grid(theta, beta, {12});
    ModelSpec spec{1, {2}};
    FitOptions opts;
    opts.condition_threshold = 1.0 + 1e-12;  // every 2x2 system exceeds this
    CHECK_THROWS_AS(fit(grid, spec, ParamSpace::defaults(1), opts),
                    AllGridPointsSingular);
}

TEST_CASE("near-zero exponent pair triggers the identifiability warning") {
    // Constant data: both exponents race to the lower-left region; with a
    // grid this flat the optimizer may settle anywhere, so force the issue
    // with a crafted two-intercept-like surface instead.
    ExponentVector theta{{{0.0}, {1.5}}};
    CoefficientVector beta{{{2.0}, {1.0}}};
    const LatticeGrid grid = noiseless_grid(theta, beta, {12, 12});
    ModelSpec spec{2, {1, 1}};
    const FitResult res = fit(grid, spec, ParamSpace::defaults(2));
    CHECK(res.theta_hat.dims[0][0] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(res.theta_hat.dims[1][0] == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(res.warnings.empty());
}
