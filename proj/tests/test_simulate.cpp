#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "powertrend/simulate.hpp"

using namespace powertrend;

namespace {

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// Theoretical autocovariance of the kernel at a lag: sum_w c_w c_{w+v}.
double kernel_autocov(const MaKernel& kernel, const std::vector<int>& lag) {
    std::map<std::vector<int>, double> coef;
    for (const auto& tap : kernel.taps) coef[tap.offset] = tap.coef;
    double s = 0.0;
    for (const auto& tap : kernel.taps) {
        std::vector<int> shifted = tap.offset;
        for (std::size_t i = 0; i < lag.size(); ++i) shifted[i] += lag[i];
        if (auto it = coef.find(shifted); it != coef.end()) s += tap.coef * it->second;
    }
    return s;
}

// Sample cross-moment E[x_u x_{u+v}] estimated over many seeds at one site.
double mc_autocov(const ErrorFieldModel& model, const std::vector<int>& n,
                  const std::vector<int>& site, const std::vector<int>& lag, int seeds,
                  std::uint64_t base) {
    std::vector<int> other(site.size());
    for (std::size_t i = 0; i < site.size(); ++i) other[i] = site[i] + lag[i];
    double s = 0.0;
    for (int k = 0; k < seeds; ++k) {
        const LatticeGrid f = gen_error_field(model, n, base + k);
        s += f.values[f.flat_index(site)] * f.values[f.flat_index(other)];
    }
    return s / seeds;
}

}  // namespace

TEST_CASE("builtin kernel coefficient sums") {
    const MaKernel ma1 = builtin_kernel("ma1_multidirection");
    CHECK(ma1.taps.size() == 9);
    CHECK(ma1.coefficient_sum() == doctest::Approx(0.04).epsilon(1e-12));

    const MaKernel ma4 = builtin_kernel("ma4_multilateral");
    CHECK(ma4.taps.size() == 17);
    CHECK(ma4.coefficient_sum() == doctest::Approx(2.76).epsilon(1e-12));

    const MaKernel ma9 = builtin_kernel("ma9_diagonal");
    CHECK(ma9.taps.size() == 19);
    double expect = 1.0;
    for (int j = 1; j <= 9; ++j) expect += 2.0 * std::pow(0.95, j);
    CHECK(ma9.coefficient_sum() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(ma9.coefficient_sum() == doctest::Approx(15.0505).epsilon(1e-4));

    CHECK_THROWS(builtin_kernel("ma2"));
}

TEST_CASE("iid field has unit moments and exact determinism") {
    const std::vector<int> n{80, 80};
    const LatticeGrid a = gen_error_field(ErrorFieldModel::iid(1.0), n, 7);
    const LatticeGrid b = gen_error_field(ErrorFieldModel::iid(1.0), n, 7);
    CHECK(a.values == b.values);

    const double se_mean = 3.0 / std::sqrt(6400.0);
    CHECK(std::abs(sample_mean(a.values)) < se_mean);
    CHECK(sample_var(a.values) == doctest::Approx(1.0).epsilon(0.06));

    const LatticeGrid c = gen_error_field(ErrorFieldModel::iid(1.0), n, 8);
    CHECK(a.values != c.values);
}

TEST_CASE("ma1 field variance matches the coefficient square sum") {
    const std::vector<int> n{100, 100};
    const ErrorFieldModel model = ErrorFieldModel::finite_ma(builtin_kernel("ma1"));
    const LatticeGrid f = gen_error_field(model, n, 21);
    // Var = 1 + 8 * 0.12^2 = 1.1152; 3 s.e. of a variance over 10^4 draws.
    CHECK(sample_var(f.values) == doctest::Approx(1.1152).epsilon(0.05));
}

TEST_CASE("theoretical and sampled autocovariances agree at small lags") {
    const std::vector<int> n{9, 9};
    for (const char* name : {"ma1", "ma4", "ma9"}) {
        const MaKernel kernel = builtin_kernel(name);
        const ErrorFieldModel model = ErrorFieldModel::finite_ma(kernel);
        for (const std::vector<int> lag : {std::vector<int>{0, 0}, {1, 0}, {1, 1}}) {
            const double want = kernel_autocov(kernel, lag);
            const double got = mc_autocov(model, n, {4, 4}, lag, 4000, 10000);
            // 3 MC standard errors, bounded below for near-zero targets.
            const double tol =
                std::max(0.15, 3.0 * std::sqrt(kernel_autocov(kernel, {0, 0})) / 60.0);
            CHECK(std::abs(got - want) < tol);
        }
    }
}

TEST_CASE("corner sites share the interior covariance structure") {
    // Padding makes the field exactly stationary: the lag-(1,0) moment at
    // the corner matches the interior one within MC error.
    const std::vector<int> n{8, 8};
    const ErrorFieldModel model = ErrorFieldModel::finite_ma(builtin_kernel("ma1"));
    const std::vector<int> lag{1, 0};
    const double corner = mc_autocov(model, n, {1, 1}, lag, 6000, 50000);
    const double interior = mc_autocov(model, n, {4, 4}, lag, 6000, 90000);
    CHECK(std::abs(corner - interior) < 0.09);
    const double want = kernel_autocov(builtin_kernel("ma1"), lag);
    CHECK(std::abs(corner - want) < 0.09);
}

TEST_CASE("gen_dataset adds the trend surface elementwise") {
    ExponentVector theta{{{1.0}, {0.5}}};
    CoefficientVector beta{{{2.0}, {-1.0}}};
    const std::vector<int> n{6, 7};
    const ErrorFieldModel model = ErrorFieldModel::iid(1.0);
    const LatticeGrid field = gen_error_field(model, n, 3);
    const LatticeGrid data = gen_dataset(theta, beta, model, n, 3);
    std::vector<int> u{1, 1};
    std::size_t idx = 0;
    do {
        CHECK(data.values[idx] ==
              doctest::Approx(field.values[idx] + trend_value(u, theta, beta))
                  .epsilon(1e-14));
        ++idx;
    } while (next_site(n, u));
}

TEST_CASE("zero coefficients reproduce the error field") {
    ExponentVector theta{{{1.0}, {1.0}}};
    CoefficientVector beta{{{0.0}, {0.0}}};
    const std::vector<int> n{5, 5};
    const ErrorFieldModel model = ErrorFieldModel::iid(1.0);
    CHECK(gen_dataset(theta, beta, model, n, 11).values ==
          gen_error_field(model, n, 11).values);
}

TEST_CASE("kernel validation") {
    MaKernel k;
    k.taps.push_back({{1, 0}, 0.5});
    CHECK_THROWS(k.validate());  // no zero offset
    k.taps.push_back({{0, 0}, 1.0});
    CHECK_NOTHROW(k.validate());
    k.taps.push_back({{1, 0}, 0.25});
    CHECK_THROWS(k.validate());  // duplicate offset
}

TEST_CASE("long-run variance accessors") {
    const ErrorFieldModel iid = ErrorFieldModel::iid(2.0);
    CHECK(iid.long_run_variance() == doctest::Approx(4.0));
    const ErrorFieldModel ma1 = ErrorFieldModel::finite_ma(builtin_kernel("ma1"));
    CHECK(ma1.long_run_variance() == doctest::Approx(0.0016).epsilon(1e-10));
    CHECK(ma1.marginal_variance() == doctest::Approx(1.1152).epsilon(1e-10));
}
