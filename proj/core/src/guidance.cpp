#include "scorefuse/guidance.hpp"

#include <cmath>

namespace scorefuse {

void GuidanceTerm::validate() const {
    if (!op) throw std::invalid_argument("guidance term has no measurement operator");
    if (y.size() != op->output_size()) {
        throw DimensionError("observation length " + std::to_string(y.size()) +
                             " does not match operator output " +
                             std::to_string(op->output_size()));
    }
    if (sigma_y < 0.0 || gamma_hat < 0.0) {
        throw std::invalid_argument("sigma_y and gamma_hat must be nonnegative");
    }
    if (sigma_y == 0.0 && gamma_hat == 0.0) {
        throw std::invalid_argument("sigma_y + sigma^2*gamma_hat would vanish");
    }
    if (weight < 0.0) throw std::invalid_argument("guidance weight must be nonnegative");
}

StateTensor likelihood_score(const GuidanceTerm& term, const Denoiser& denoiser,
                             const StateTensor& x_t, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("likelihood_score: sigma must be > 0");
    term.validate();
    const StateTensor x0_hat = denoiser.denoise(x_t, sigma);
    ObsVector predicted = term.op->apply(x0_hat);
    // residual y - M(D(x))
    std::vector<double>& residual = predicted.values;
    for (std::size_t i = 0; i < residual.size(); ++i) {
        residual[i] = term.y[i] - residual[i];
    }
    const StateTensor pulled = term.op->vjp(x0_hat, residual);
    StateTensor grad = denoiser.vjp(x_t, sigma, pulled);
    const double scale = 2.0 / (term.sigma_y + sigma * sigma * term.gamma_hat);
    for (double& v : grad.data()) v *= scale;
    return grad;
}

StateTensor fuse_scores(std::span<const GuidanceTerm> terms, const Denoiser& denoiser,
                        const StateTensor& x_t, double sigma) {
    if (terms.empty()) throw std::invalid_argument("fuse_scores: no guidance terms");
    StateTensor fused = zeros_like(x_t);
    bool first = true;
    for (const GuidanceTerm& term : terms) {
        if (term.weight == 0.0) continue;
        StateTensor s = likelihood_score(term, denoiser, x_t, sigma);
        if (first && term.weight == 1.0) {
            fused = std::move(s);  // keep single-term guidance bit-identical
            first = false;
            continue;
        }
        if (first) {
            fused = zeros_like(x_t);
            first = false;
        }
        add_scaled(fused, s, term.weight);
    }
    return fused;
}

StateTensor clip_gradient(const StateTensor& g, double clip_norm) {
    if (clip_norm < 0.0) throw std::invalid_argument("clip_norm must be >= 0");
    if (!g.all_finite()) throw std::invalid_argument("clip_gradient: non-finite gradient");
    if (clip_norm == 0.0) return g;
    const double norm = l2_norm(g);
    if (norm <= clip_norm) return g;
    StateTensor out = g;
    const double scale = clip_norm / norm;
    for (double& v : out.data()) v *= scale;
    return out;
}

}  // namespace scorefuse
