#include "xpde/functional.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "xpde/errors.hpp"

namespace xpde {

Combine Combine::linear(std::vector<double> coeff) {
    Combine c;
    c.kind = Kind::Linear;
    c.coeff = std::move(coeff);
    return c;
}

Combine Combine::integral_constraint(double lambda, double target) {
    Combine c;
    c.kind = Kind::IntegralConstraint;
    c.lambda = lambda;
    c.target = target;
    return c;
}

Combine Combine::rayleigh() {
    Combine c;
    c.kind = Kind::Rayleigh;
    return c;
}

Combine Combine::rayleigh_constrained(double lambda1, double lambda2) {
    Combine c;
    c.kind = Kind::RayleighConstrained;
    c.lambda1 = lambda1;
    c.lambda2 = lambda2;
    return c;
}

namespace {

constexpr double kMassGuard = 1e-12;

double rayleigh_mass(double m) {
    if (m < kMassGuard)
        throw DegenerateDenominatorError("rayleigh: L2 mass below 1e-12");
    return m;
}

}  // namespace

double Combine::value(std::span<const double> I) const {
    switch (kind) {
        case Kind::Linear: {
            double v = 0.0;
            for (std::size_t i = 0; i < I.size(); ++i) v += coeff[i] * I[i];
            return v;
        }
        case Kind::IntegralConstraint: {
            const double c = I[1] - target;
            return I[0] + lambda * c * c;
        }
        case Kind::Rayleigh:
            return (I[0] + I[1]) / rayleigh_mass(I[2]);
        case Kind::RayleighConstrained: {
            const double mass = rayleigh_mass(I[2]);
            const double c = I[2] - 1.0;
            return (I[0] + I[1]) / mass + lambda1 * I[3] + lambda2 * c * c;
        }
    }
    return 0.0;
}

void Combine::partials(std::span<const double> I, std::span<double> out) const {
    switch (kind) {
        case Kind::Linear:
            for (std::size_t i = 0; i < I.size(); ++i) out[i] = coeff[i];
            return;
        case Kind::IntegralConstraint:
            out[0] = 1.0;
            out[1] = 2.0 * lambda * (I[1] - target);
            return;
        case Kind::Rayleigh: {
            const double mass = rayleigh_mass(I[2]);
            out[0] = 1.0 / mass;
            out[1] = 1.0 / mass;
            out[2] = -(I[0] + I[1]) / (mass * mass);
            return;
        }
        case Kind::RayleighConstrained: {
            const double mass = rayleigh_mass(I[2]);
            out[0] = 1.0 / mass;
            out[1] = 1.0 / mass;
            out[2] = -(I[0] + I[1]) / (mass * mass) + 2.0 * lambda2 * (I[2] - 1.0);
            out[3] = lambda1;
            return;
        }
    }
}

FunctionalEvaluator::FunctionalEvaluator(Functional f, std::size_t chunk)
    : f_(std::move(f)), chunk_(chunk) {
    if (!f_.graph) throw std::invalid_argument("FunctionalEvaluator: null graph");
    const std::size_t n_terms = f_.terms.size();

    backward_order_.resize(n_terms);
    for (std::size_t t = 0; t < n_terms; ++t) {
        const NodeId roots[1] = {f_.terms[t].integrand};
        backward_order_[t] = f_.graph->reachable(roots);
        std::reverse(backward_order_[t].begin(), backward_order_[t].end());
        terms_of_kind_[static_cast<int>(f_.terms[t].kind)].push_back(static_cast<int>(t));
    }

    forward_order_.resize(kNumBatchKinds);
    for (int k = 0; k < kNumBatchKinds; ++k) {
        std::vector<NodeId> roots;
        for (int t : terms_of_kind_[k]) roots.push_back(f_.terms[static_cast<std::size_t>(t)].integrand);
        if (!roots.empty()) forward_order_[static_cast<std::size_t>(k)] = f_.graph->reachable(roots);
    }

    values_.resize(f_.graph->size() * chunk_);
    adjoint_.resize(f_.graph->size() * chunk_);
    term_sum_.resize(n_terms);
    term_grad_.assign(n_terms, std::vector<double>(static_cast<std::size_t>(f_.n_params)));
    last_I_.resize(n_terms);
}

void FunctionalEvaluator::run(std::span<const double> params, const BatchSet& batches,
                              bool with_grad) {
    const SymGraph& g = *f_.graph;
    std::fill(term_sum_.begin(), term_sum_.end(), 0.0);
    if (with_grad)
        for (auto& tg : term_grad_) std::fill(tg.begin(), tg.end(), 0.0);

    for (int k = 0; k < kNumBatchKinds; ++k) {
        const auto& term_ids = terms_of_kind_[k];
        if (term_ids.empty()) continue;
        const SampleBatch& batch = batches.by_kind[static_cast<std::size_t>(k)];
        if (batch.n == 0)
            throw std::invalid_argument("FunctionalEvaluator: missing batch for a used kind");
        const auto& order = forward_order_[static_cast<std::size_t>(k)];

        for (std::size_t start = 0; start < batch.n; start += chunk_) {
            const std::size_t m = std::min(chunk_, batch.n - start);

            for (NodeId id : order) {
                const SymNode& n = g.node(id);
                double* out = &values_[static_cast<std::size_t>(id) * chunk_];
                switch (n.op) {
                    case SymOp::Const:
                        std::fill(out, out + m, n.value);
                        break;
                    case SymOp::Coord: {
                        const double* src = batch.column(n.idx).data() + start;
                        std::memcpy(out, src, m * sizeof(double));
                        break;
                    }
                    case SymOp::Param:
                        std::fill(out, out + m, params[static_cast<std::size_t>(n.idx)]);
                        break;
                    case SymOp::Add: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        const double* B = &values_[static_cast<std::size_t>(n.b) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) out[i] = A[i] + B[i];
                        break;
                    }
                    case SymOp::Sub: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        const double* B = &values_[static_cast<std::size_t>(n.b) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) out[i] = A[i] - B[i];
                        break;
                    }
                    case SymOp::Mul: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        const double* B = &values_[static_cast<std::size_t>(n.b) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) out[i] = A[i] * B[i];
                        break;
                    }
                    case SymOp::Div: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        const double* B = &values_[static_cast<std::size_t>(n.b) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) {
                            if (std::abs(B[i]) < SymGraph::kDivGuard)
                                throw NonFiniteError("functional: denominator below guard");
                            out[i] = A[i] / B[i];
                        }
                        break;
                    }
                    case SymOp::Neg: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) out[i] = -A[i];
                        break;
                    }
                    case SymOp::PowInt: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        if (n.idx == 2)
                            for (std::size_t i = 0; i < m; ++i) out[i] = A[i] * A[i];
                        else if (n.idx == 3)
                            for (std::size_t i = 0; i < m; ++i) out[i] = A[i] * A[i] * A[i];
                        else if (n.idx == 4)
                            for (std::size_t i = 0; i < m; ++i) {
                                const double s = A[i] * A[i];
                                out[i] = s * s;
                            }
                        else
                            for (std::size_t i = 0; i < m; ++i) {
                                double v = A[i];
                                for (int r = 1; r < n.idx; ++r) v *= A[i];
                                out[i] = v;
                            }
                        break;
                    }
                    case SymOp::Exp: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) out[i] = std::exp(A[i]);
                        break;
                    }
                    case SymOp::Sin: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) out[i] = std::sin(A[i]);
                        break;
                    }
                    case SymOp::Cos: {
                        const double* A = &values_[static_cast<std::size_t>(n.a) * chunk_];
                        for (std::size_t i = 0; i < m; ++i) out[i] = std::cos(A[i]);
                        break;
                    }
                }
            }

            for (int t : term_ids) {
                const double* row =
                    &values_[static_cast<std::size_t>(f_.terms[static_cast<std::size_t>(t)].integrand) *
                             chunk_];
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i) s += row[i];
                if (!std::isfinite(s)) throw NonFiniteError("functional: non-finite integrand");
                term_sum_[static_cast<std::size_t>(t)] += s;

                if (!with_grad) continue;

                // Reverse sweep for this term over its own sub-DAG.
                const auto& back = backward_order_[static_cast<std::size_t>(t)];
                for (NodeId id : back) {
                    double* a = &adjoint_[static_cast<std::size_t>(id) * chunk_];
                    std::fill(a, a + m, 0.0);
                }
                {
                    double* seed =
                        &adjoint_[static_cast<std::size_t>(
                                      f_.terms[static_cast<std::size_t>(t)].integrand) *
                                  chunk_];
                    std::fill(seed, seed + m, 1.0);
                }
                auto& tg = term_grad_[static_cast<std::size_t>(t)];
                for (NodeId id : back) {
                    const SymNode& n = g.node(id);
                    const double* w = &adjoint_[static_cast<std::size_t>(id) * chunk_];
                    switch (n.op) {
                        case SymOp::Const:
                        case SymOp::Coord:
                            break;
                        case SymOp::Param: {
                            double s2 = 0.0;
                            for (std::size_t i = 0; i < m; ++i) s2 += w[i];
                            tg[static_cast<std::size_t>(n.idx)] += s2;
                            break;
                        }
                        case SymOp::Add: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            double* wb = &adjoint_[static_cast<std::size_t>(n.b) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) {
                                wa[i] += w[i];
                                wb[i] += w[i];
                            }
                            break;
                        }
                        case SymOp::Sub: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            double* wb = &adjoint_[static_cast<std::size_t>(n.b) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) {
                                wa[i] += w[i];
                                wb[i] -= w[i];
                            }
                            break;
                        }
                        case SymOp::Mul: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            double* wb = &adjoint_[static_cast<std::size_t>(n.b) * chunk_];
                            const double* va = &values_[static_cast<std::size_t>(n.a) * chunk_];
                            const double* vb = &values_[static_cast<std::size_t>(n.b) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) {
                                wa[i] += w[i] * vb[i];
                                wb[i] += w[i] * va[i];
                            }
                            break;
                        }
                        case SymOp::Div: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            double* wb = &adjoint_[static_cast<std::size_t>(n.b) * chunk_];
                            const double* vz = &values_[static_cast<std::size_t>(id) * chunk_];
                            const double* vb = &values_[static_cast<std::size_t>(n.b) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) {
                                wa[i] += w[i] / vb[i];
                                wb[i] -= w[i] * vz[i] / vb[i];
                            }
                            break;
                        }
                        case SymOp::Neg: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) wa[i] -= w[i];
                            break;
                        }
                        case SymOp::PowInt: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            const double* va = &values_[static_cast<std::size_t>(n.a) * chunk_];
                            const double p = static_cast<double>(n.idx);
                            if (n.idx == 2)
                                for (std::size_t i = 0; i < m; ++i) wa[i] += w[i] * 2.0 * va[i];
                            else if (n.idx == 3)
                                for (std::size_t i = 0; i < m; ++i)
                                    wa[i] += w[i] * 3.0 * va[i] * va[i];
                            else if (n.idx == 4)
                                for (std::size_t i = 0; i < m; ++i)
                                    wa[i] += w[i] * 4.0 * va[i] * va[i] * va[i];
                            else
                                for (std::size_t i = 0; i < m; ++i) {
                                    double v = 1.0;
                                    for (int r = 1; r < n.idx; ++r) v *= va[i];
                                    wa[i] += w[i] * p * v;
                                }
                            break;
                        }
                        case SymOp::Exp: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            const double* vz = &values_[static_cast<std::size_t>(id) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) wa[i] += w[i] * vz[i];
                            break;
                        }
                        case SymOp::Sin: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            const double* va = &values_[static_cast<std::size_t>(n.a) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) wa[i] += w[i] * std::cos(va[i]);
                            break;
                        }
                        case SymOp::Cos: {
                            double* wa = &adjoint_[static_cast<std::size_t>(n.a) * chunk_];
                            const double* va = &values_[static_cast<std::size_t>(n.a) * chunk_];
                            for (std::size_t i = 0; i < m; ++i) wa[i] -= w[i] * std::sin(va[i]);
                            break;
                        }
                    }
                }
            }
        }
    }

    for (std::size_t t = 0; t < f_.terms.size(); ++t) {
        const SampleBatch& batch =
            batches.by_kind[static_cast<std::size_t>(static_cast<int>(f_.terms[t].kind))];
        last_I_[t] = batch.weight * term_sum_[t] / static_cast<double>(batch.n);
        if (!std::isfinite(last_I_[t])) throw NonFiniteError("functional: non-finite integral");
    }
}

double FunctionalEvaluator::value(std::span<const double> params, const BatchSet& batches) {
    run(params, batches, false);
    const double v = f_.combine.value(last_I_);
    if (!std::isfinite(v)) throw NonFiniteError("functional: non-finite value");
    return v;
}

double FunctionalEvaluator::value_and_grad(std::span<const double> params, const BatchSet& batches,
                                           std::span<double> grad_out) {
    if (static_cast<int>(grad_out.size()) != f_.n_params)
        throw std::invalid_argument("value_and_grad: gradient size mismatch");
    run(params, batches, true);

    std::vector<double> dF(f_.terms.size());
    f_.combine.partials(last_I_, dF);

    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    for (std::size_t t = 0; t < f_.terms.size(); ++t) {
        const SampleBatch& batch =
            batches.by_kind[static_cast<std::size_t>(static_cast<int>(f_.terms[t].kind))];
        const double scale = dF[t] * batch.weight / static_cast<double>(batch.n);
        const auto& tg = term_grad_[t];
        for (std::size_t p = 0; p < grad_out.size(); ++p) grad_out[p] += scale * tg[p];
    }
    for (double v : grad_out)
        if (!std::isfinite(v)) throw NonFiniteError("functional: non-finite gradient");

    const double v = f_.combine.value(last_I_);
    if (!std::isfinite(v)) throw NonFiniteError("functional: non-finite value");
    return v;
}

}  // namespace xpde
