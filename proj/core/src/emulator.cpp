#include "scorefuse/emulator.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "scorefuse/fourier.hpp"
#include "scorefuse/synth.hpp"

namespace scorefuse {

SpectralAdvectionEmulator::SpectralAdvectionEmulator(Grid grid,
                                                     std::vector<std::string> channels,
                                                     AdvectionParams params, int grid_factor)
    : grid_(grid), channels_(std::move(channels)), params_(std::move(params)),
      grid_factor_(grid_factor) {
    validate_grid(grid_);
    if (grid_factor_ < 1) throw std::invalid_argument("grid factor must be >= 1");
    if (params_.velocity.empty()) {
        throw std::invalid_argument("advection needs at least one velocity entry");
    }
    if (params_.velocity.size() != 1 && params_.velocity.size() != channels_.size()) {
        throw std::invalid_argument("velocity list must have one entry or one per channel");
    }
    if (params_.diffusion < 0.0) throw std::invalid_argument("diffusion must be >= 0");
}

StateTensor SpectralAdvectionEmulator::step(const StateTensor& coarse) const {
    if (coarse.grid() != grid_ || coarse.channels() != channels_) {
        throw DimensionError("emulator bound to a different grid/channel layout");
    }
    const int w = grid_.width;
    StateTensor out(grid_, channels_);
    std::vector<std::complex<double>> line(w), spec(w), back(w);
    for (int c = 0; c < coarse.channel_count(); ++c) {
        double v = params_.velocity.size() == 1 ? params_.velocity[0] : params_.velocity[c];
        if (params_.mean_feedback != 0.0) {
            double mean = 0.0;
            for (int y = 0; y < grid_.height; ++y) {
                for (int x = 0; x < w; ++x) mean += coarse(c, y, x);
            }
            mean /= static_cast<double>(grid_.height) * w;
            v += params_.mean_feedback * mean;
        }
        for (int y = 0; y < grid_.height; ++y) {
            for (int x = 0; x < w; ++x) line[x] = {coarse(c, y, x), 0.0};
            dft_1d(line, spec, false);
            for (int k = 0; k < w; ++k) {
                const int sk = signed_wavenumber(k, w);
                const double phase = -2.0 * std::numbers::pi * sk * v / w;
                const double decay = std::exp(-params_.diffusion * sk * sk);
                spec[k] *= std::complex<double>(std::cos(phase), std::sin(phase)) * decay;
            }
            dft_1d(spec, back, true);
            for (int x = 0; x < w; ++x) out.at(c, y, x) = back[x].real();
        }
    }
    return out;
}

ReferenceSimulator::ReferenceSimulator(Grid grid, std::vector<std::string> channels,
                                       AdvectionParams params, double forcing_rms,
                                       int forcing_k_lo, int forcing_k_hi, std::uint64_t seed)
    : core_(grid, channels, std::move(params), 1), grid_(grid), channels_(std::move(channels)),
      forcing_rms_(forcing_rms), k_lo_(forcing_k_lo), k_hi_(forcing_k_hi), seed_(seed) {}

StateTensor ReferenceSimulator::step(const StateTensor& state, long step_index) const {
    StateTensor out = core_.step(state);
    if (forcing_rms_ > 0.0) {
        // forcing stream keyed by step index keeps trajectories reproducible
        CounterRng rng(seed_ + 0x9E37ULL * static_cast<std::uint64_t>(step_index + 1));
        const StateTensor forcing =
            make_band_limited_field({grid_, channels_}, k_lo_, k_hi_, forcing_rms_, rng);
        add_scaled(out, forcing, 1.0);
    }
    return out;
}

std::vector<StateTensor> ReferenceSimulator::trajectory(const StateTensor& init,
                                                        int steps) const {
    std::vector<StateTensor> out;
    out.reserve(steps + 1);
    out.push_back(init);
    for (int s = 0; s < steps; ++s) out.push_back(step(out.back(), s));
    return out;
}

}  // namespace scorefuse
