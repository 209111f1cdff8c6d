#ifndef XPDE_SAMPLING_HPP
#define XPDE_SAMPLING_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "xpde/rng.hpp"

namespace xpde {

// Axis-aligned box, optionally with a leading time coordinate. When timed,
// coordinate 0 is t and coordinates 1..d are space; otherwise coordinates
// 0..d-1 are space.
struct DomainSpec {
    std::vector<double> lower;
    std::vector<double> upper;
    bool timed = false;

    static DomainSpec hypercube(int dim, double lo, double hi);
    static DomainSpec timed_hypercube(int space_dim, double t_lo, double t_hi, double lo, double hi);

    int n_coords() const { return static_cast<int>(lower.size()); }
    int space_dim() const { return n_coords() - (timed ? 1 : 0); }
    double volume() const;
    double boundary_measure() const;  // hypercube surface measure (untimed only)
    double space_volume() const;      // volume of the spatial cross-section
    void validate() const;
};

// A batch of sample points stored column-major: coordinate c of point j is
// data[c * n + j]. `weight` is the measure of the sampled region, so that
// integral estimates are weight * mean(f).
struct SampleBatch {
    std::size_t n = 0;
    int dim = 0;
    std::vector<double> data;
    double weight = 0.0;

    double coord(int c, std::size_t j) const { return data[static_cast<std::size_t>(c) * n + j]; }
    std::span<const double> column(int c) const {
        return {data.data() + static_cast<std::size_t>(c) * n, n};
    }
    void point(std::size_t j, std::span<double> out) const {
        for (int c = 0; c < dim; ++c) out[static_cast<std::size_t>(c)] = coord(c, j);
    }
};

// n i.i.d. uniform points in the (timed) box interior; weight = volume.
SampleBatch sample_interior(const DomainSpec& spec, std::size_t n, RandomStream& rng);

// Uniform points on the boundary of an untimed hypercube: each point picks one
// of the 2d facets uniformly, pins that coordinate to its bound and samples the
// rest uniformly. weight = surface measure.
SampleBatch sample_boundary(const DomainSpec& spec, std::size_t n, RandomStream& rng);

// The t = t_lo slice of a timed box: coordinate 0 fixed, space uniform.
// weight = spatial volume.
SampleBatch sample_initial_slice(const DomainSpec& spec, std::size_t n, RandomStream& rng);

// weight * mean of f over the batch points.
double mc_integral(const std::function<double(std::span<const double>)>& f, const SampleBatch& batch);

}  // namespace xpde

#endif
