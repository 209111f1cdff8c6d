#include "xpde/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "xpde/errors.hpp"

namespace xpde {

LrSchedule LrSchedule::constant(double rate) { return {Kind::Constant, rate, 0}; }
LrSchedule LrSchedule::cosine(double initial, std::size_t horizon) {
    return {Kind::Cosine, initial, horizon};
}

double LrSchedule::rate(std::size_t step) const {
    if (kind == Kind::Constant) return initial;
    if (horizon == 0) return initial;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(horizon));
    return initial * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double rate) {
    if (params.size() != state.m.size() || grad.size() != state.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= rate * mhat / (std::sqrt(vhat) + state.eps);
        if (!std::isfinite(params[i])) throw NonFiniteError("adam_step: parameter overflow");
    }
}

BfgsOptimizer::BfgsOptimizer(std::size_t n, double trial_step, int max_halvings)
    : n_(n), trial_step_(trial_step), max_halvings_(max_halvings), h_(n * n, 0.0),
      g0_(n), g1_(n), dir_(n), trial_(n), s_(n), y_(n), hy_(n) {
    for (std::size_t i = 0; i < n; ++i) h_[i * n + i] = 1.0;
}

BfgsOptimizer::Status BfgsOptimizer::step(
    std::vector<double>& params, const std::function<double(std::span<const double>)>& loss,
    const std::function<void(std::span<const double>, std::span<double>)>& grad) {
    grad(params, g0_);

    double gnorm = 0.0;
    for (double v : g0_) gnorm += v * v;
    if (gnorm == 0.0) return Status::Ok;

    for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) acc += h_[i * n_ + j] * g0_[j];
        dir_[i] = -acc;
    }

    double gtp = 0.0;
    for (std::size_t i = 0; i < n_; ++i) gtp += g0_[i] * dir_[i];
    if (gtp >= 0.0) {
        // Not a descent direction (numerical breakdown): fall back to the
        // steepest descent direction.
        for (std::size_t i = 0; i < n_; ++i) dir_[i] = -g0_[i];
        gtp = -gnorm;
    }

    auto loss_at = [&](double a, double& out) {
        for (std::size_t i = 0; i < n_; ++i) trial_[i] = params[i] + a * dir_[i];
        try {
            out = loss(trial_);
        } catch (const NonFiniteError&) {
            return false;
        }
        return std::isfinite(out);
    };
    auto slope_at = [&](double a) {
        for (std::size_t i = 0; i < n_; ++i) trial_[i] = params[i] + a * dir_[i];
        grad(trial_, g1_);
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += g1_[i] * dir_[i];
        return s;
    };

    // Strong-Wolfe search from the unit trial step (bracket + zoom), with a
    // shrink/zoom budget of max_halvings_ on each phase. A violated
    // sufficient-decrease condition backtracks; a still-steep slope
    // extrapolates, which is what gets through narrow curved valleys.
    const double c1 = 1e-4;
    const double c2 = 0.9;
    const double f0 = loss(params);
    double alpha = trial_step_;
    double alpha_prev = 0.0;
    double f_prev = f0;
    double alpha_acc = -1.0;
    double f_acc = f0;
    double fnew = f0;

    double lo = 0.0, hi = 0.0, f_lo = f0, f_hi = f0;
    bool bracketed = false;
    for (int it = 0; it <= max_halvings_; ++it) {
        double fa = std::numeric_limits<double>::infinity();
        const bool finite = loss_at(alpha, fa);
        if (!finite || fa > f0 + c1 * alpha * gtp || (it > 0 && fa >= f_prev)) {
            lo = alpha_prev;
            f_lo = f_prev;
            hi = alpha;
            f_hi = fa;
            bracketed = true;
            break;
        }
        const double sa = slope_at(alpha);
        if (std::abs(sa) <= -c2 * gtp) {
            alpha_acc = alpha;
            f_acc = fa;
            break;
        }
        if (sa >= 0.0) {
            lo = alpha;
            f_lo = fa;
            hi = alpha_prev;
            f_hi = f_prev;
            bracketed = true;
            break;
        }
        alpha_prev = alpha;
        f_prev = fa;
        alpha *= 2.0;
    }

    if (bracketed) {
        for (int it = 0; it <= max_halvings_ && alpha_acc < 0.0; ++it) {
            // Candidate from the quadratic fit anchored at the entry point,
            // safeguarded into the strict interior of the bracket. The 0.1
            // floor is what lets a badly scaled direction shrink ten orders
            // of magnitude inside the budget.
            const double w = hi - lo;
            double cand = lo + 0.5 * w;
            if (std::isfinite(f_hi) && hi > 0.0) {
                const double denom = f_hi - f0 - gtp * hi;
                if (denom > 0.0) cand = -gtp * hi * hi / (2.0 * denom);
            }
            const double a_min = std::min(lo, hi) + 0.1 * std::abs(w);
            const double a_max = std::max(lo, hi) - 0.1 * std::abs(w);
            cand = std::clamp(cand, a_min, a_max);

            double fm = std::numeric_limits<double>::infinity();
            if (!loss_at(cand, fm) || fm > f0 + c1 * cand * gtp || fm >= f_lo) {
                hi = cand;
                f_hi = fm;
                continue;
            }
            const double sm = slope_at(cand);
            if (std::abs(sm) <= -c2 * gtp) {
                alpha_acc = cand;
                f_acc = fm;
                break;
            }
            if (sm * (hi - lo) >= 0.0) {
                hi = lo;
                f_hi = f_lo;
            }
            lo = cand;
            f_lo = fm;
        }
        // No Wolfe point inside the budget: settle for the best
        // sufficient-decrease point found, if any.
        if (alpha_acc < 0.0 && lo > 0.0 && f_lo <= f0) {
            alpha_acc = lo;
            f_acc = f_lo;
        }
    }
    if (alpha_acc < 0.0) return Status::LineSearchFailure;

    // Refinement: quadratic fit through f(0), f'(0), f(alpha); on an exactly
    // quadratic objective this lands on the line minimum, which is what
    // gives the finite-termination behaviour on quadratics.
    alpha = alpha_acc;
    fnew = f_acc;
    const double curv = (fnew - f0 - gtp * alpha) / (alpha * alpha);
    if (curv > 0.0) {
        const double alpha_star = -gtp / (2.0 * curv);
        if (alpha_star > 0.0 && alpha_star < 1e6 * alpha && alpha_star != alpha) {
            double fstar;
            if (loss_at(alpha_star, fstar) && fstar < fnew) {
                alpha = alpha_star;
                fnew = fstar;
            }
        }
    }
    for (std::size_t i = 0; i < n_; ++i) trial_[i] = params[i] + alpha * dir_[i];

    grad(trial_, g1_);
    double ys = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        s_[i] = trial_[i] - params[i];
        y_[i] = g1_[i] - g0_[i];
        ys += y_[i] * s_[i];
    }
    params = trial_;

    if (ys > 1e-10) {
        if (first_update_) {
            // Scale the initial approximation to the secant pair before the
            // first update; this conditions the unit trial step to the
            // objective's scale.
            double yy = 0.0;
            for (std::size_t i = 0; i < n_; ++i) yy += y_[i] * y_[i];
            if (yy > 0.0) {
                const double scale = ys / yy;
                for (std::size_t i = 0; i < n_; ++i) h_[i * n_ + i] = scale;
            }
            first_update_ = false;
        }
        const double rho = 1.0 / ys;
        double yhy = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) acc += h_[i * n_ + j] * y_[j];
            hy_[i] = acc;
            yhy += y_[i] * acc;
        }
        // H <- H + rho*(1 + rho*yHy) s s^T - rho*(s (Hy)^T + (Hy) s^T);
        // symmetric by construction.
        const double c = rho * (1.0 + rho * yhy);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                h_[i * n_ + j] += c * s_[i] * s_[j] - rho * (s_[i] * hy_[j] + hy_[i] * s_[j]);
    }
    return Status::Ok;
}

CoarseTuneResult coarse_tune(FunctionalEvaluator& eval, const PDEProblem& problem,
                             const std::array<std::size_t, kNumBatchKinds>& batch_sizes,
                             std::vector<double> params, int t1, int t2, double adam_lr,
                             double bfgs_step_size, RandomStream& rng) {
    CoarseTuneResult out;
    try {
        AdamState adam(params.size());
        std::vector<double> grad(params.size());
        for (int t = 0; t < t1; ++t) {
            BatchSet batches = problem.sample(batch_sizes, rng);
            eval.value_and_grad(params, batches, grad);
            adam_step(adam, params, grad, adam_lr);
        }

        // The second-order phase runs on one fixed batch: line-search
        // decisions and secant pairs need a deterministic objective.
        BfgsOptimizer bfgs(params.size(), bfgs_step_size);
        if (t2 > 0) {
            BatchSet batches = problem.sample(batch_sizes, rng);
            auto loss = [&](std::span<const double> p) { return eval.value(p, batches); };
            auto grad_fn = [&](std::span<const double> p, std::span<double> g) {
                eval.value_and_grad(p, batches, g);
            };
            for (int t = 0; t < t2; ++t)
                if (bfgs.step(params, loss, grad_fn) == BfgsOptimizer::Status::LineSearchFailure)
                    break;  // treated as converged
        }

        BatchSet final_batches = problem.sample(batch_sizes, rng);
        out.loss = eval.value(params, final_batches);
        out.params = std::move(params);
    } catch (const NonFiniteError&) {
        out.failed = true;
        out.loss = std::numeric_limits<double>::infinity();
        out.params = {};
    } catch (const DegenerateDenominatorError&) {
        out.failed = true;
        out.loss = std::numeric_limits<double>::infinity();
        out.params = {};
    }
    return out;
}

FineTuneResult fine_tune(FunctionalEvaluator& eval, const PDEProblem& problem,
                         const std::array<std::size_t, kNumBatchKinds>& batch_sizes,
                         std::vector<double> params, int t3, const LrSchedule& schedule,
                         RandomStream& rng) {
    FineTuneResult out;
    BatchSet val_batches = problem.sample(batch_sizes, rng);

    auto val_loss = [&](const std::vector<double>& p) {
        try {
            return eval.value(p, val_batches);
        } catch (const NonFiniteError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const DegenerateDenominatorError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    out.params = params;
    out.loss = val_loss(params);
    out.val_trace.push_back(out.loss);

    AdamState adam(params.size());
    std::vector<double> grad(params.size());
    double rate_scale = 1.0;
    bool halved = false;
    for (int t = 0; t < t3; ++t) {
        BatchSet batches = problem.sample(batch_sizes, rng);
        try {
            eval.value_and_grad(params, batches, grad);
            adam_step(adam, params, grad, rate_scale * schedule.rate(static_cast<std::size_t>(t)));
        } catch (const NonFiniteError&) {
            if (halved) {
                out.aborted = true;
                break;
            }
            halved = true;
            rate_scale = 0.5;
            continue;
        } catch (const DegenerateDenominatorError&) {
            if (halved) {
                out.aborted = true;
                break;
            }
            halved = true;
            rate_scale = 0.5;
            continue;
        }
        const double v = val_loss(params);
        out.val_trace.push_back(v);
        if (v < out.loss) {
            out.loss = v;
            out.params = params;
        }
    }
    return out;
}

}  // namespace xpde
