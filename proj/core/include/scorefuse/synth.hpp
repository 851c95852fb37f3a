#pragma once

#include <cstdint>

#include "scorefuse/prior.hpp"
#include "scorefuse/sampler.hpp"

namespace scorefuse {

/// Random-phase harmonic field with wavenumber radii in [k_lo, k_hi], scaled
/// to the requested root-mean-square amplitude. Harmonics are periodic in
/// both directions, which is fine for test data on the clamped-y grid.
StateTensor make_band_limited_field(const FieldShape& shape, int k_lo, int k_hi, double rms,
                                    CounterRng& rng);

/// Controls for the synthetic multiscale mixture used across experiments:
/// each component mean is a distinct smooth large-scale field plus distinct
/// fine-scale texture, so the prior carries energy above any coarse-grid
/// Nyquist while components stay mutually distinguishable.
struct MultiscaleGmmParams {
    int components = 4;
    double smooth_rms = 0.8;
    int smooth_k_lo = 1;
    int smooth_k_hi = 3;
    double texture_rms = 0.35;
    int texture_k_lo = 6;
    int texture_k_hi = 14;
    double component_std = 0.15;
};

GaussianMixturePrior make_multiscale_gmm(const FieldShape& shape,
                                         const MultiscaleGmmParams& params, std::uint64_t seed);

}  // namespace scorefuse
