#pragma once

#include <vector>

#include "scorefuse/fields.hpp"
#include "scorefuse/rng.hpp"

namespace scorefuse {

/// Cheap forecast model advancing a coarse state one interval. Deterministic
/// given its input; output stays on the emulator's own grid.
class Emulator {
public:
    virtual ~Emulator() = default;
    virtual StateTensor step(const StateTensor& coarse) const = 0;
    /// Resolution ratio relative to the full reconstruction grid.
    virtual int grid_factor() const = 0;
};

struct AdvectionParams {
    /// Cells per step along x, one entry per channel (or one shared value).
    std::vector<double> velocity;
    /// Spectral diffusion coefficient; mode k decays by exp(-nu k^2) per step.
    double diffusion = 0.0;
    /// Optional mild nonlinearity: effective velocity gains
    /// mean_feedback * spatial mean of the channel, coupling the phase speed
    /// to the state itself.
    double mean_feedback = 0.0;
};

/// Row-wise spectral advection-diffusion along the periodic x axis. With
/// diffusion 0 the per-row x-spectral amplitudes are preserved exactly.
class SpectralAdvectionEmulator final : public Emulator {
public:
    SpectralAdvectionEmulator(Grid grid, std::vector<std::string> channels,
                              AdvectionParams params, int grid_factor = 1);

    StateTensor step(const StateTensor& coarse) const override;
    int grid_factor() const override { return grid_factor_; }

    const AdvectionParams& params() const { return params_; }

private:
    Grid grid_;
    std::vector<std::string> channels_;
    AdvectionParams params_;
    int grid_factor_;
};

/// Truth-generating simulator: the same advection-diffusion family on the
/// fine grid plus seeded band-limited forcing injected each step, so the
/// reference trajectory carries small-scale structure a coarse emulator
/// cannot represent.
class ReferenceSimulator {
public:
    ReferenceSimulator(Grid grid, std::vector<std::string> channels, AdvectionParams params,
                       double forcing_rms, int forcing_k_lo, int forcing_k_hi,
                       std::uint64_t seed);

    StateTensor step(const StateTensor& state, long step_index) const;

    /// Rolls the simulator forward, returning states at every step including
    /// the initial one (length steps+1).
    std::vector<StateTensor> trajectory(const StateTensor& init, int steps) const;

private:
    SpectralAdvectionEmulator core_;
    Grid grid_;
    std::vector<std::string> channels_;
    double forcing_rms_;
    int k_lo_;
    int k_hi_;
    std::uint64_t seed_;
};

}  // namespace scorefuse
