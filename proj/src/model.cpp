#include "powertrend/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace powertrend {

int ModelSpec::total_p() const {
    return std::accumulate(p_per_dim.begin(), p_per_dim.end(), 0);
}

void ModelSpec::validate() const {
    if (d < 1) throw std::invalid_argument("ModelSpec: d must be >= 1");
    if (static_cast<int>(p_per_dim.size()) != d)
        throw std::invalid_argument("ModelSpec: p_per_dim must have d entries");
    for (int pi : p_per_dim)
        if (pi < 0) throw std::invalid_argument("ModelSpec: p_i must be >= 0");
    if (total_p() < 1) throw std::invalid_argument("ModelSpec: total p must be >= 1");
}

namespace {

int total_entries(const std::vector<std::vector<double>>& dims) {
    int n = 0;
    for (const auto& v : dims) n += static_cast<int>(v.size());
    return n;
}

std::vector<double> flatten_dims(const std::vector<std::vector<double>>& dims) {
    std::vector<double> out;
    out.reserve(total_entries(dims));
    for (const auto& v : dims) out.insert(out.end(), v.begin(), v.end());
    return out;
}

std::vector<std::vector<double>> unflatten(std::span<const double> flat, const ModelSpec& spec) {
    spec.validate();
    if (static_cast<int>(flat.size()) != spec.total_p())
        throw std::invalid_argument("from_flat: size does not match spec");
    std::vector<std::vector<double>> dims(spec.d);
    std::size_t pos = 0;
    for (int i = 0; i < spec.d; ++i) {
        dims[i].assign(flat.begin() + pos, flat.begin() + pos + spec.p_per_dim[i]);
        pos += spec.p_per_dim[i];
    }
    return dims;
}

}  // namespace

int ExponentVector::total_size() const { return total_entries(dims); }
std::vector<double> ExponentVector::flatten() const { return flatten_dims(dims); }

ExponentVector ExponentVector::from_flat(std::span<const double> flat, const ModelSpec& spec) {
    return ExponentVector{unflatten(flat, spec)};
}

bool ExponentVector::same_shape(const ExponentVector& other) const {
    if (dims.size() != other.dims.size()) return false;
    for (std::size_t i = 0; i < dims.size(); ++i)
        if (dims[i].size() != other.dims[i].size()) return false;
    return true;
}

int CoefficientVector::total_size() const { return total_entries(dims); }
std::vector<double> CoefficientVector::flatten() const { return flatten_dims(dims); }

CoefficientVector CoefficientVector::from_flat(std::span<const double> flat, const ModelSpec& spec) {
    return CoefficientVector{unflatten(flat, spec)};
}

ParamSpace ParamSpace::defaults(int d) {
    ParamSpace s;
    s.lower.assign(d, -0.45);
    s.upper.assign(d, 4.0);
    s.delta = 0.05;
    return s;
}

void ParamSpace::validate(const ModelSpec& spec) const {
    spec.validate();
    if (static_cast<int>(lower.size()) != spec.d || static_cast<int>(upper.size()) != spec.d)
        throw std::invalid_argument("ParamSpace: bounds must have d entries");
    if (delta <= 0) throw std::invalid_argument("ParamSpace: delta must be > 0");
    for (int i = 0; i < spec.d; ++i) {
        if (lower[i] <= -0.5)
            throw std::invalid_argument("ParamSpace: lower bound must exceed -1/2");
        if (lower[i] >= upper[i])
            throw std::invalid_argument("ParamSpace: lower bound must be below upper bound");
        if (upper[i] - lower[i] < (spec.p_per_dim[i] - 1) * delta)
            throw std::invalid_argument(
                "ParamSpace: box too narrow for delta-separated exponents");
    }
}

long long LatticeGrid::site_count() const {
    long long n = 1;
    for (int e : extents) n *= e;
    return n;
}

std::size_t LatticeGrid::flat_index(std::span<const int> u) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < extents.size(); ++i)
        idx = idx * extents[i] + static_cast<std::size_t>(u[i] - 1);
    return idx;
}

void LatticeGrid::validate() const {
    if (extents.empty()) throw std::invalid_argument("LatticeGrid: extents empty");
    for (int e : extents)
        if (e < 1) throw std::invalid_argument("LatticeGrid: extents must be positive");
    if (static_cast<long long>(values.size()) != site_count())
        throw std::invalid_argument("LatticeGrid: value count must equal product of extents");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("LatticeGrid: values must be finite");
}

std::vector<double> eval_regressor(std::span<const int> u, const ExponentVector& theta) {
    if (u.size() != theta.dims.size())
        throw std::invalid_argument("eval_regressor: u and theta dimension mismatch");
    std::vector<double> f;
    f.reserve(theta.total_size());
    for (std::size_t i = 0; i < theta.dims.size(); ++i) {
        if (u[i] < 1) throw std::invalid_argument("eval_regressor: u_i must be >= 1");
        for (double e : theta.dims[i])
            f.push_back(e == 0.0 ? 1.0 : std::pow(static_cast<double>(u[i]), e));
    }
    return f;
}

double trend_value(std::span<const int> u, const ExponentVector& theta,
                   const CoefficientVector& beta) {
    if (theta.dims.size() != beta.dims.size())
        throw std::invalid_argument("trend_value: theta and beta dimension mismatch");
    for (std::size_t i = 0; i < theta.dims.size(); ++i)
        if (theta.dims[i].size() != beta.dims[i].size())
            throw std::invalid_argument("trend_value: theta and beta shape mismatch");
    const std::vector<double> f = eval_regressor(u, theta);
    const std::vector<double> b = beta.flatten();
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * b[k];
    return s;
}

ValidationReport validate_theta(const ExponentVector& h, const ParamSpace& space) {
    ValidationReport rep;
    auto fail = [&rep](std::string msg) {
        rep.ok = false;
        rep.violations.push_back(std::move(msg));
    };
    if (h.dims.size() != space.lower.size()) {
        fail("dimension count differs from parameter space");
        return rep;
    }
    for (std::size_t i = 0; i < h.dims.size(); ++i) {
        const auto& hi = h.dims[i];
        std::ostringstream dim;
        dim << "dimension " << (i + 1);
        for (std::size_t j = 0; j < hi.size(); ++j) {
            if (j == 0 && hi[j] < space.lower[i])
                fail(dim.str() + ": first exponent below lower bound");
            if (j + 1 == hi.size() && hi[j] > space.upper[i])
                fail(dim.str() + ": last exponent above upper bound");
            if (j > 0 && hi[j] - hi[j - 1] < space.delta)
                fail(dim.str() + ": separation below delta");
        }
    }
    return rep;
}

bool next_site(std::span<const int> extents, std::vector<int>& u) {
    for (int i = static_cast<int>(extents.size()) - 1; i >= 0; --i) {
        if (u[i] < extents[i]) {
            ++u[i];
            return true;
        }
        u[i] = 1;
    }
    return false;
}

}  // namespace powertrend
