#pragma once

#include <memory>
#include <span>
#include <vector>

#include "scorefuse/measure.hpp"
#include "scorefuse/prior.hpp"

namespace scorefuse {

/// One measurement modality entering the posterior:
/// observations y under operator M with noise variance sigma_y, variance
/// inflation gamma_hat and a fusion weight (1 for the reference modality).
struct GuidanceTerm {
    std::shared_ptr<const MeasurementOp> op;
    std::vector<double> y;
    double sigma_y = 1e-1;
    double gamma_hat = 5e-3;
    double weight = 1.0;

    void validate() const;
};

/// Defaults match the tuned observation-noise settings for the two built-in
/// modalities: structured coarse grids and sparse point sets.
constexpr double kCoarseSigmaY = 1e-1;
constexpr double kCoarseGammaHat = 5e-3;
constexpr double kPointSigmaY = 5e-4;
constexpr double kPointGammaHat = 1e-5;

struct GuidanceConfig {
    std::vector<GuidanceTerm> terms;
    double lambda_g = 1.0;
    /// L2 threshold for clipping the fused likelihood score; 0 disables.
    double clip_norm = 0.0;
    /// When set, the sampler derives clip_norm as 10x the norm of the prior
    /// drift observed at its first step.
    bool auto_clip = false;

    bool empty() const { return terms.empty(); }
    bool active() const { return !terms.empty() && lambda_g != 0.0; }
};

/// Gradient of the perturbed log-likelihood
///   -||y - M(D(x; s))||^2 / (sigma_y + s^2 gamma_hat)
/// with respect to x, evaluated as
///   (2 / (sigma_y + s^2 gamma_hat)) * D_vjp(x, s, M^T (y - M(D(x; s)))).
/// Points in the direction of increasing likelihood.
StateTensor likelihood_score(const GuidanceTerm& term, const Denoiser& denoiser,
                             const StateTensor& x_t, double sigma);

/// Weighted sum of per-term likelihood scores. Terms with weight 0 are
/// skipped so they cannot perturb the remaining terms even at the bit level.
StateTensor fuse_scores(std::span<const GuidanceTerm> terms, const Denoiser& denoiser,
                        const StateTensor& x_t, double sigma);

/// Rescales g onto the L2 ball of radius clip_norm; identity when disabled
/// (clip_norm = 0) or already inside. Direction is preserved.
StateTensor clip_gradient(const StateTensor& g, double clip_norm);

}  // namespace scorefuse
