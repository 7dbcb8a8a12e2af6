#include "powertrend/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "powertrend/rng.hpp"

namespace powertrend {

namespace rng {

double gaussian_at(std::uint64_t key, std::uint64_t counter) {
    const double u1 = uniform_at(key, 2 * counter);
    const double u2 = uniform_at(key, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng

int MaKernel::dimension() const {
    return taps.empty() ? 0 : static_cast<int>(taps.front().offset.size());
}

double MaKernel::coefficient_sum() const {
    double s = 0.0;
    for (const auto& t : taps) s += t.coef;
    return s;
}

double MaKernel::coefficient_square_sum() const {
    double s = 0.0;
    for (const auto& t : taps) s += t.coef * t.coef;
    return s;
}

std::vector<int> MaKernel::max_offsets() const {
    std::vector<int> m(dimension(), 0);
    for (const auto& t : taps)
        for (std::size_t i = 0; i < t.offset.size(); ++i)
            m[i] = std::max(m[i], std::abs(t.offset[i]));
    return m;
}

void MaKernel::validate() const {
    if (taps.empty()) throw std::invalid_argument("MaKernel: no taps");
    if (sigma_eps <= 0) throw std::invalid_argument("MaKernel: sigma_eps must be > 0");
    const int d = dimension();
    bool has_zero = false;
    std::set<std::vector<int>> seen;
    for (const auto& t : taps) {
        if (static_cast<int>(t.offset.size()) != d)
            throw std::invalid_argument("MaKernel: inconsistent offset dimensions");
        if (!seen.insert(t.offset).second)
            throw std::invalid_argument("MaKernel: duplicate offset");
        if (std::all_of(t.offset.begin(), t.offset.end(), [](int v) { return v == 0; }))
            has_zero = true;
    }
    if (!has_zero) throw std::invalid_argument("MaKernel: zero offset required");
}

ErrorFieldModel ErrorFieldModel::iid(double sigma) {
    if (sigma <= 0) throw std::invalid_argument("ErrorFieldModel: sigma must be > 0");
    ErrorFieldModel m;
    m.kind = Kind::iid;
    m.sigma = sigma;
    return m;
}

ErrorFieldModel ErrorFieldModel::finite_ma(MaKernel kernel) {
    kernel.validate();
    ErrorFieldModel m;
    m.kind = Kind::finite_ma;
    m.kernel = std::move(kernel);
    return m;
}

double ErrorFieldModel::long_run_variance() const {
    if (kind == Kind::iid) return sigma * sigma;
    const double s = kernel.coefficient_sum();
    return s * s * kernel.sigma_eps * kernel.sigma_eps;
}

double ErrorFieldModel::marginal_variance() const {
    if (kind == Kind::iid) return sigma * sigma;
    return kernel.coefficient_square_sum() * kernel.sigma_eps * kernel.sigma_eps;
}

MaKernel builtin_kernel(const std::string& name) {
    MaKernel k;
    if (name == "ma1_multidirection" || name == "ma1") {
        k.taps.push_back({{0, 0}, 1.0});
        for (int j = -1; j <= 1; ++j)
            for (int l = -1; l <= 1; ++l)
                if (j != 0 || l != 0) k.taps.push_back({{j, l}, -0.12});
    } else if (name == "ma4_multilateral" || name == "ma4") {
        const double a[4] = {0.14, 0.12, 0.10, 0.08};
        k.taps.push_back({{0, 0}, 1.0});
        for (int j = 1; j <= 4; ++j) {
            k.taps.push_back({{j, 0}, a[j - 1]});
            k.taps.push_back({{-j, 0}, a[j - 1]});
            k.taps.push_back({{0, j}, a[j - 1]});
            k.taps.push_back({{0, -j}, a[j - 1]});
        }
    } else if (name == "ma9_diagonal" || name == "ma9") {
        k.taps.push_back({{0, 0}, 1.0});
        for (int j = 1; j <= 9; ++j) {
            const double c = std::pow(0.95, j);
            k.taps.push_back({{j, j}, c});
            k.taps.push_back({{-j, -j}, c});
        }
    } else {
        throw std::invalid_argument("builtin_kernel: unknown kernel '" + name + "'");
    }
    k.validate();
    return k;
}

namespace {

// Innovations are indexed on the padded box [1-M_i, n_i+M_i]; counters are
// the row-major rank within that box so the stream is site-addressable.
struct PaddedBox {
    std::vector<int> low, high, size;

    PaddedBox(std::span<const int> extents, std::span<const int> pad) {
        const int d = static_cast<int>(extents.size());
        low.resize(d);
        high.resize(d);
        size.resize(d);
        for (int i = 0; i < d; ++i) {
            low[i] = 1 - pad[i];
            high[i] = extents[i] + pad[i];
            size[i] = high[i] - low[i] + 1;
        }
    }

    std::uint64_t rank(std::span<const int> w) const {
        std::uint64_t r = 0;
        for (std::size_t i = 0; i < low.size(); ++i)
            r = r * static_cast<std::uint64_t>(size[i]) +
                static_cast<std::uint64_t>(w[i] - low[i]);
        return r;
    }
};

}  // namespace

LatticeGrid gen_error_field(const ErrorFieldModel& model, std::span<const int> extents,
                            std::uint64_t seed) {
    for (int e : extents)
        if (e < 1) throw std::invalid_argument("gen_error_field: extents must be positive");
    const int d = static_cast<int>(extents.size());

    LatticeGrid field;
    field.extents.assign(extents.begin(), extents.end());
    field.values.resize(static_cast<std::size_t>(field.site_count()));

    if (model.kind == ErrorFieldModel::Kind::iid) {
        const std::vector<int> pad(d, 0);
        const PaddedBox box(extents, pad);
        std::vector<int> u(d, 1);
        std::size_t idx = 0;
        do {
            field.values[idx++] = model.sigma * rng::gaussian_at(seed, box.rank(u));
        } while (next_site(extents, u));
        return field;
    }

    const MaKernel& kern = model.kernel;
    kern.validate();
    if (kern.dimension() != d)
        throw std::invalid_argument("gen_error_field: kernel dimension mismatch");
    const std::vector<int> pad = kern.max_offsets();
    const PaddedBox box(extents, pad);

    std::uint64_t padded_count = 1;
    for (int s : box.size) padded_count *= static_cast<std::uint64_t>(s);
    std::vector<double> eps(padded_count);
    for (std::uint64_t r = 0; r < padded_count; ++r) eps[r] = rng::gaussian_at(seed, r);

    std::vector<int> u(d, 1);
    std::vector<int> w(d);
    std::size_t idx = 0;
    do {
        double x = 0.0;
        for (const auto& tap : kern.taps) {
            for (int i = 0; i < d; ++i) w[i] = u[i] - tap.offset[i];
            x += tap.coef * eps[box.rank(w)];
        }
        field.values[idx++] = kern.sigma_eps * x;
    } while (next_site(extents, u));
    return field;
}

LatticeGrid gen_dataset(const ExponentVector& theta, const CoefficientVector& beta,
                        const ErrorFieldModel& model, std::span<const int> extents,
                        std::uint64_t seed) {
    LatticeGrid grid = gen_error_field(model, extents, seed);
    std::vector<int> u(extents.size(), 1);
    std::size_t idx = 0;
    do {
        grid.values[idx++] += trend_value(u, theta, beta);
    } while (next_site(extents, u));
    return grid;
}

}  // namespace powertrend
