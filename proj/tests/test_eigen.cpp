#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "xpde/eigen_iter.hpp"

using namespace xpde;
using namespace xpde::test;

namespace {

// v = -|x|^2 / 2 as a depth-3 expression: Id root over + over square/const0.
Expression half_norm_expression(int d, double leaf_alpha) {
    auto t = std::make_shared<TreeTemplate>(TreeTemplate::depth3(d));
    auto seq = sequence_from_names(*t, {"id", "add", "square", "const0"});
    std::vector<double> p(static_cast<std::size_t>(t->param_count()), 0.0);
    p[0] = 1.0;
    for (int c = 0; c < d; ++c) p[static_cast<std::size_t>(2 + c)] = leaf_alpha;
    return Expression(t, seq, p);
}

}  // namespace

TEST_CASE("simplified eigen residual vanishes at the ground state") {
    const int d = 3;
    Expression v = half_norm_expression(d, -0.5);
    RandomStream rng(1);
    SampleBatch batch = sample_interior(DomainSpec::hypercube(d, -3.0, 3.0), 4096, rng);
    CHECK(simplified_eigen_functional(v, static_cast<double>(d), batch) < 1e-20);
}

TEST_CASE("simplified eigen functional of v=0 is the fourth-moment integral") {
    const int d = 2;
    Expression v = half_norm_expression(d, 0.0);
    RandomStream rng(2);
    SampleBatch batch = sample_interior(DomainSpec::hypercube(d, -3.0, 3.0), 8192, rng);
    const double value = simplified_eigen_functional(v, 0.0, batch);
    const double oracle = mc_integral(
        [](std::span<const double> x) {
            const double n2 = x[0] * x[0] + x[1] * x[1];
            return n2 * n2;
        },
        batch);
    CHECK(value == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("the functional is an exact quadratic in gamma") {
    const int d = 2;
    RandomStream rng(3);
    Expression v = half_norm_expression(d, -0.3);
    SampleBatch batch = sample_interior(DomainSpec::hypercube(d, -3.0, 3.0), 2048, rng);

    const double f0 = simplified_eigen_functional(v, 0.0, batch);
    const double f1 = simplified_eigen_functional(v, 1.0, batch);
    const double f2 = simplified_eigen_functional(v, 2.0, batch);
    // quadratic through (0,f0),(1,f1),(2,f2) must predict gamma=5 exactly
    const double a = (f2 - 2 * f1 + f0) / 2.0;
    const double b = f1 - f0 - a;
    const double predicted = a * 25.0 + b * 5.0 + f0;
    CHECK(simplified_eigen_functional(v, 5.0, batch) ==
          doctest::Approx(predicted).epsilon(1e-10));
}

TEST_CASE("rayleigh update of the exact log ground state gives the eigenvalue") {
    const int d = 2;
    Expression v = half_norm_expression(d, -0.5);
    RandomStream rng(4);
    SampleBatch batch = sample_interior(DomainSpec::hypercube(d, -3.0, 3.0), 200000, rng);
    const double gamma = rayleigh_of_exp(v, batch);
    CHECK(std::abs(gamma - 2.0) / 2.0 < 0.02);
}

TEST_CASE("rayleigh update is exactly invariant to additive constants in v") {
    const int d = 2;
    Expression v = half_norm_expression(d, -0.5);
    auto p_shifted = v.params();
    p_shifted[1] += 7.5;  // root beta: v + c
    Expression v_shifted = v.with_params(p_shifted);

    RandomStream rng(5);
    SampleBatch batch = sample_interior(DomainSpec::hypercube(d, -3.0, 3.0), 4096, rng);
    const double a = rayleigh_of_exp(v, batch);
    const double b = rayleigh_of_exp(v_shifted, batch);
    // exact up to roundoff of the shifted exponent
    CHECK(a == doctest::Approx(b).epsilon(1e-13));
}

TEST_CASE("constant expressions give the mean of the potential as quotient") {
    const int d = 2;
    // v graph with zero gradient: exp(v) is constant, so the quotient is
    // integral of w u^2 / integral of u^2 = mean of w over the box.
    Expression v = half_norm_expression(d, 0.0);  // v = beta = 0
    RandomStream rng(6);
    SampleBatch batch = sample_interior(DomainSpec::hypercube(d, -3.0, 3.0), 100000, rng);
    const double got = rayleigh_of_exp(v, batch);
    const double oracle = mc_integral(
                              [](std::span<const double> x) {
                                  return x[0] * x[0] + x[1] * x[1];
                              },
                              batch) /
                          batch.weight;
    CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("iterate_eigenpair micro run records a trajectory") {
    PDEProblem prob = eigen_problem(1);
    SearchConfig c;
    c.T = 3;
    c.N = 4;
    c.K = 3;
    c.T1 = 3;
    c.T2 = 2;
    c.T3 = 5;
    c.batch_sizes = {128, 64, 0, 0};
    c.metric_batch = 1000;
    c.seed = 11;
    EigenIterConfig ic;
    ic.G = 1;
    ic.rayleigh_batch = 5000;
    EigenSolveResult r = iterate_eigenpair(prob, c, ic);
    CHECK(r.found);
    CHECK(r.gamma_trajectory.size() == 2);  // gamma_0 and gamma_1
    for (double g : r.gamma_trajectory) CHECK(std::isfinite(g));
    CHECK(r.final_expression.rfind("exp(", 0) == 0);
    CHECK(r.searches.size() == 2);
}
