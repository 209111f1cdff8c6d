#include "xpde/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xpde/errors.hpp"

namespace xpde {

double quantile_threshold(std::span<const double> scores, double nu) {
    if (scores.empty()) throw std::invalid_argument("quantile_threshold: empty scores");
    if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("quantile_threshold: nu in (0,1]");
    const auto n = static_cast<double>(scores.size());
    auto k = static_cast<std::size_t>(std::ceil((1.0 - nu) * n));
    if (k < 1) k = 1;
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted[k - 1];
}

Controller::Controller(TreeTemplatePtr tmpl, OperatorSet op_set, ControllerConfig config,
                       RandomStream& init_rng)
    : tmpl_(std::move(tmpl)), op_set_(std::move(op_set)), config_(config), adam_(0) {
    op_set_.validate();
    slice_offset_.resize(static_cast<std::size_t>(tmpl_->size()));
    for (int i = 0; i < tmpl_->size(); ++i) {
        slice_offset_[static_cast<std::size_t>(i)] = width_;
        width_ += node_width(i);
    }

    if (config_.arch == ControllerConfig::Arch::Table) {
        phi_.assign(static_cast<std::size_t>(width_), 0.0);
    } else {
        const int h = config_.hidden_width;
        // layout: w1[h], b1[h], w2[width*h], b2[width]
        phi_.assign(static_cast<std::size_t>(2 * h + width_ * h + width_), 0.0);
        for (int i = 0; i < 2 * h; ++i) phi_[static_cast<std::size_t>(i)] = init_rng.uniform(-0.5, 0.5);
        // Output layer starts at zero so the initial pmfs are uniform.
    }
    adam_ = AdamState(phi_.size());
}

int Controller::node_width(int node) const {
    return tmpl_->node(node).is_binary ? static_cast<int>(op_set_.binary.size())
                                       : static_cast<int>(op_set_.unary.size());
}

std::vector<double> Controller::logits() const {
    if (config_.arch == ControllerConfig::Arch::Table) return phi_;
    const int h = config_.hidden_width;
    std::vector<double> out(static_cast<std::size_t>(width_));
    for (int o = 0; o < width_; ++o) {
        double acc = phi_[static_cast<std::size_t>(2 * h + width_ * h + o)];  // b2
        for (int j = 0; j < h; ++j) {
            const double hidden = std::tanh(phi_[static_cast<std::size_t>(j)] +
                                            phi_[static_cast<std::size_t>(h + j)]);
            acc += phi_[static_cast<std::size_t>(2 * h + o * h + j)] * hidden;
        }
        out[static_cast<std::size_t>(o)] = acc;
    }
    return out;
}

void Controller::accumulate_logit_grad_to_phi(std::span<const double> dlogits,
                                              std::span<double> dphi) const {
    if (config_.arch == ControllerConfig::Arch::Table) {
        for (int o = 0; o < width_; ++o) dphi[static_cast<std::size_t>(o)] += dlogits[static_cast<std::size_t>(o)];
        return;
    }
    const int h = config_.hidden_width;
    for (int j = 0; j < h; ++j) {
        const double pre = phi_[static_cast<std::size_t>(j)] + phi_[static_cast<std::size_t>(h + j)];
        const double hidden = std::tanh(pre);
        const double dh = 1.0 - hidden * hidden;
        double back = 0.0;
        for (int o = 0; o < width_; ++o) {
            const double w2 = phi_[static_cast<std::size_t>(2 * h + o * h + j)];
            dphi[static_cast<std::size_t>(2 * h + o * h + j)] += dlogits[static_cast<std::size_t>(o)] * hidden;
            back += w2 * dlogits[static_cast<std::size_t>(o)];
        }
        dphi[static_cast<std::size_t>(j)] += back * dh;
        dphi[static_cast<std::size_t>(h + j)] += back * dh;
    }
    for (int o = 0; o < width_; ++o)
        dphi[static_cast<std::size_t>(2 * h + width_ * h + o)] += dlogits[static_cast<std::size_t>(o)];
}

std::vector<std::vector<double>> Controller::node_distributions() const {
    const std::vector<double> l = logits();
    std::vector<std::vector<double>> pmfs;
    pmfs.reserve(static_cast<std::size_t>(tmpl_->size()));
    for (int i = 0; i < tmpl_->size(); ++i) {
        const int off = slice_offset_[static_cast<std::size_t>(i)];
        const int w = node_width(i);
        std::vector<double> p(static_cast<std::size_t>(w));
        double mx = l[static_cast<std::size_t>(off)];
        for (int j = 1; j < w; ++j) mx = std::max(mx, l[static_cast<std::size_t>(off + j)]);
        double z = 0.0;
        for (int j = 0; j < w; ++j) {
            p[static_cast<std::size_t>(j)] = std::exp(l[static_cast<std::size_t>(off + j)] - mx);
            z += p[static_cast<std::size_t>(j)];
        }
        for (auto& v : p) v /= z;
        pmfs.push_back(std::move(p));
    }
    return pmfs;
}

SampledBatch Controller::sample_sequences(int n, double epsilon, RandomStream& rng) const {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw std::invalid_argument("sample_sequences: epsilon must satisfy 0 <= epsilon < 1");
    const auto pmfs = node_distributions();
    SampledBatch batch;
    batch.sequences.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        SampledSequence seq;
        seq.ops.codes.resize(static_cast<std::size_t>(tmpl_->size()));
        seq.log_probs.resize(static_cast<std::size_t>(tmpl_->size()));
        seq.explored.resize(static_cast<std::size_t>(tmpl_->size()));
        for (int i = 0; i < tmpl_->size(); ++i) {
            const auto& p = pmfs[static_cast<std::size_t>(i)];
            const int w = node_width(i);
            int choice;
            bool explored = epsilon > 0.0 && rng.uniform01() < epsilon;
            if (explored) {
                choice = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(w)));
            } else {
                const double u = rng.uniform01();
                double acc = 0.0;
                choice = w - 1;
                for (int j = 0; j < w; ++j) {
                    acc += p[static_cast<std::size_t>(j)];
                    if (u < acc) {
                        choice = j;
                        break;
                    }
                }
            }
            seq.explored[static_cast<std::size_t>(i)] = explored ? 1 : 0;
            seq.log_probs[static_cast<std::size_t>(i)] =
                std::log(p[static_cast<std::size_t>(choice)]);
            seq.ops.codes[static_cast<std::size_t>(i)] =
                tmpl_->node(i).is_binary
                    ? static_cast<std::uint8_t>(op_set_.binary[static_cast<std::size_t>(choice)])
                    : static_cast<std::uint8_t>(op_set_.unary[static_cast<std::size_t>(choice)]);
        }
        batch.sequences.push_back(std::move(seq));
    }
    return batch;
}

namespace {

std::vector<double> batch_weights(std::span<const double> scores, double nu, bool risk_seeking,
                                  double& threshold_out) {
    const std::size_t n = scores.size();
    std::vector<double> w(n);
    if (risk_seeking) {
        const double threshold = quantile_threshold(scores, nu);
        threshold_out = threshold;
        for (std::size_t k = 0; k < n; ++k)
            w[k] = scores[k] >= threshold ? (scores[k] - threshold) / static_cast<double>(n) : 0.0;
    } else {
        threshold_out = 0.0;
        for (std::size_t k = 0; k < n; ++k) w[k] = scores[k] / static_cast<double>(n);
    }
    return w;
}

}  // namespace

double Controller::surrogate_objective(const SampledBatch& batch, std::span<const double> scores,
                                       double nu, bool risk_seeking) const {
    double threshold = 0.0;
    const std::vector<double> w = batch_weights(scores, nu, risk_seeking, threshold);
    const auto pmfs = node_distributions();
    double obj = 0.0;
    for (std::size_t k = 0; k < batch.sequences.size(); ++k) {
        if (w[k] == 0.0) continue;
        const auto& seq = batch.sequences[k];
        double lp = 0.0;
        for (int i = 0; i < tmpl_->size(); ++i) {
            const auto& p = pmfs[static_cast<std::size_t>(i)];
            int idx;
            if (tmpl_->node(i).is_binary)
                idx = op_set_.binary_index(seq.ops.binary_at(i));
            else
                idx = op_set_.unary_index(seq.ops.unary_at(i));
            lp += std::log(p[static_cast<std::size_t>(idx)]);
        }
        obj += w[k] * lp;
    }
    return obj;
}

std::vector<double> Controller::objective_gradient(const SampledBatch& batch,
                                                   std::span<const double> scores, double nu,
                                                   bool risk_seeking) const {
    double threshold = 0.0;
    const std::vector<double> w = batch_weights(scores, nu, risk_seeking, threshold);
    const auto pmfs = node_distributions();
    std::vector<double> dlogits(static_cast<std::size_t>(width_), 0.0);
    for (std::size_t k = 0; k < batch.sequences.size(); ++k) {
        if (w[k] == 0.0) continue;
        const auto& seq = batch.sequences[k];
        for (int i = 0; i < tmpl_->size(); ++i) {
            const int off = slice_offset_[static_cast<std::size_t>(i)];
            const auto& p = pmfs[static_cast<std::size_t>(i)];
            int idx;
            if (tmpl_->node(i).is_binary)
                idx = op_set_.binary_index(seq.ops.binary_at(i));
            else
                idx = op_set_.unary_index(seq.ops.unary_at(i));
            // d log softmax / d logit = onehot - pmf
            for (int j = 0; j < static_cast<int>(p.size()); ++j) {
                const double onehot = j == idx ? 1.0 : 0.0;
                dlogits[static_cast<std::size_t>(off + j)] +=
                    w[k] * (onehot - p[static_cast<std::size_t>(j)]);
            }
        }
    }
    std::vector<double> dphi(phi_.size(), 0.0);
    accumulate_logit_grad_to_phi(dlogits, dphi);
    return dphi;
}

Controller::UpdateInfo Controller::update(const SampledBatch& batch,
                                          std::span<const double> scores, double nu,
                                          double learning_rate, bool risk_seeking) {
    if (batch.sequences.size() != scores.size())
        throw std::invalid_argument("controller update: batch/scores size mismatch");
    for (double s : scores)
        if (!std::isfinite(s)) throw NonFiniteError("controller update: non-finite score");

    UpdateInfo info;
    const std::vector<double> w = batch_weights(scores, nu, risk_seeking, info.threshold);
    for (double s : scores) info.mean_score += s;
    info.mean_score /= static_cast<double>(scores.size());
    for (double v : w)
        if (v != 0.0) ++info.contributors;

    info.surrogate = surrogate_objective(batch, scores, nu, risk_seeking);

    std::vector<double> dphi = objective_gradient(batch, scores, nu, risk_seeking);

    bool all_zero = true;
    for (double v : dphi)
        if (v != 0.0) {
            all_zero = false;
            break;
        }
    if (all_zero) return info;  // e.g. every score equal: exact zero update

    // Ascent realized as Adam on the negated gradient.
    for (auto& v : dphi) v = -v;
    adam_step(adam_, phi_, dphi, learning_rate);
    return info;
}

void Controller::set_phi(std::vector<double> phi) {
    if (phi.size() != phi_.size()) throw std::invalid_argument("set_phi: size mismatch");
    phi_ = std::move(phi);
}

}  // namespace xpde
