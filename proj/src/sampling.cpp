#include "xpde/sampling.hpp"

#include <cmath>
#include <stdexcept>

#include "xpde/errors.hpp"

namespace xpde {

DomainSpec DomainSpec::hypercube(int dim, double lo, double hi) {
    DomainSpec s;
    s.lower.assign(static_cast<std::size_t>(dim), lo);
    s.upper.assign(static_cast<std::size_t>(dim), hi);
    s.timed = false;
    s.validate();
    return s;
}

DomainSpec DomainSpec::timed_hypercube(int space_dim, double t_lo, double t_hi, double lo, double hi) {
    DomainSpec s;
    s.lower.assign(static_cast<std::size_t>(space_dim) + 1, lo);
    s.upper.assign(static_cast<std::size_t>(space_dim) + 1, hi);
    s.lower[0] = t_lo;
    s.upper[0] = t_hi;
    s.timed = true;
    s.validate();
    return s;
}

void DomainSpec::validate() const {
    if (lower.empty() || lower.size() != upper.size())
        throw ConfigError("domain: bounds arrays empty or mismatched");
    if (space_dim() < 1) throw ConfigError("domain: spatial dimension must be >= 1");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i])) throw ConfigError("domain: lower bound must be < upper bound");
}

double DomainSpec::volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
    return v;
}

double DomainSpec::space_volume() const {
    double v = 1.0;
    for (std::size_t i = timed ? 1 : 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
    return v;
}

double DomainSpec::boundary_measure() const {
    if (timed) throw ConfigError("boundary measure is defined for untimed hypercubes only");
    const double vol = volume();
    double m = 0.0;
    for (std::size_t i = 0; i < lower.size(); ++i) m += 2.0 * vol / (upper[i] - lower[i]);
    return m;
}

SampleBatch sample_interior(const DomainSpec& spec, std::size_t n, RandomStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_interior: n must be >= 1");
    const int dim = spec.n_coords();
    SampleBatch b;
    b.n = n;
    b.dim = dim;
    b.weight = spec.volume();
    b.data.resize(static_cast<std::size_t>(dim) * n);
    // Point-major draw order so the stream is independent of storage layout.
    for (std::size_t j = 0; j < n; ++j)
        for (int c = 0; c < dim; ++c)
            b.data[static_cast<std::size_t>(c) * n + j] =
                rng.uniform(spec.lower[static_cast<std::size_t>(c)], spec.upper[static_cast<std::size_t>(c)]);
    return b;
}

SampleBatch sample_boundary(const DomainSpec& spec, std::size_t n, RandomStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_boundary: n must be >= 1");
    if (spec.timed) throw ConfigError("sample_boundary: requires an untimed hypercube");
    const int dim = spec.n_coords();
    SampleBatch b;
    b.n = n;
    b.dim = dim;
    b.weight = spec.boundary_measure();
    b.data.resize(static_cast<std::size_t>(dim) * n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t facet = rng.bounded(2 * static_cast<std::uint64_t>(dim));
        const int pinned = static_cast<int>(facet / 2);
        const bool high = (facet % 2) == 1;
        for (int c = 0; c < dim; ++c) {
            double v;
            if (c == pinned)
                v = high ? spec.upper[static_cast<std::size_t>(c)] : spec.lower[static_cast<std::size_t>(c)];
            else
                v = rng.uniform(spec.lower[static_cast<std::size_t>(c)], spec.upper[static_cast<std::size_t>(c)]);
            b.data[static_cast<std::size_t>(c) * n + j] = v;
        }
    }
    return b;
}

SampleBatch sample_initial_slice(const DomainSpec& spec, std::size_t n, RandomStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_initial_slice: n must be >= 1");
    if (!spec.timed) throw ConfigError("sample_initial_slice: requires a timed domain");
    const int dim = spec.n_coords();
    SampleBatch b;
    b.n = n;
    b.dim = dim;
    b.weight = spec.space_volume();
    b.data.resize(static_cast<std::size_t>(dim) * n);
    for (std::size_t j = 0; j < n; ++j) {
        b.data[j] = spec.lower[0];
        for (int c = 1; c < dim; ++c)
            b.data[static_cast<std::size_t>(c) * n + j] =
                rng.uniform(spec.lower[static_cast<std::size_t>(c)], spec.upper[static_cast<std::size_t>(c)]);
    }
    return b;
}

double mc_integral(const std::function<double(std::span<const double>)>& f, const SampleBatch& batch) {
    std::vector<double> pt(static_cast<std::size_t>(batch.dim));
    double sum = 0.0;
    for (std::size_t j = 0; j < batch.n; ++j) {
        batch.point(j, pt);
        sum += f(pt);
    }
    const double value = batch.weight * (sum / static_cast<double>(batch.n));
    if (!std::isfinite(value)) throw NonFiniteError("mc_integral: non-finite estimate");
    return value;
}

}  // namespace xpde
