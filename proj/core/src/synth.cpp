#include "scorefuse/synth.hpp"

#include <cmath>
#include <numbers>

namespace scorefuse {

StateTensor make_band_limited_field(const FieldShape& shape, int k_lo, int k_hi, double rms,
                                    CounterRng& rng) {
    if (k_lo < 0 || k_hi < k_lo) throw std::invalid_argument("bad wavenumber band");
    const Grid& g = shape.grid;
    StateTensor out(g, shape.channels);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int c = 0; c < out.channel_count(); ++c) {
        // one random harmonic set per channel
        for (int ky = -k_hi; ky <= k_hi; ++ky) {
            for (int kx = 0; kx <= k_hi; ++kx) {
                if (kx == 0 && ky <= 0) continue;  // avoid double-counting conjugates
                const double radius = std::sqrt(static_cast<double>(kx) * kx +
                                                static_cast<double>(ky) * ky);
                if (radius < k_lo - 0.5 || radius > k_hi + 0.5) continue;
                const double amp = rng.normal();
                const double phase = two_pi * rng.uniform();
                for (int y = 0; y < g.height; ++y) {
                    for (int x = 0; x < g.width; ++x) {
                        const double arg = two_pi * (static_cast<double>(kx) * x / g.width +
                                                     static_cast<double>(ky) * y / g.height) +
                                           phase;
                        out.at(c, y, x) += amp * std::cos(arg);
                    }
                }
            }
        }
    }
    double ss = 0.0;
    for (double v : out.data()) ss += v * v;
    const double current = std::sqrt(ss / static_cast<double>(out.size()));
    if (current > 0.0) {
        const double scale = rms / current;
        for (double& v : out.data()) v *= scale;
    }
    return out;
}

GaussianMixturePrior make_multiscale_gmm(const FieldShape& shape,
                                         const MultiscaleGmmParams& params, std::uint64_t seed) {
    if (params.components < 1) throw std::invalid_argument("mixture needs >= 1 component");
    CounterRng rng(seed);
    std::vector<GmmComponent> comps;
    comps.reserve(params.components);
    const double w = 1.0 / params.components;
    for (int k = 0; k < params.components; ++k) {
        StateTensor mean = make_band_limited_field(shape, params.smooth_k_lo, params.smooth_k_hi,
                                                   params.smooth_rms, rng);
        const StateTensor texture = make_band_limited_field(
            shape, params.texture_k_lo, params.texture_k_hi, params.texture_rms, rng);
        add_scaled(mean, texture, 1.0);
        comps.push_back({w, std::move(mean), params.component_std});
    }
    // exact unit total weight regardless of rounding
    double total = 0.0;
    for (const auto& comp : comps) total += comp.weight;
    for (auto& comp : comps) comp.weight /= total;
    return GaussianMixturePrior(std::move(comps));
}

}  // namespace scorefuse
