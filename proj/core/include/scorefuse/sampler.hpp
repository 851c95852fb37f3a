#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scorefuse/guidance.hpp"
#include "scorefuse/prior.hpp"

namespace scorefuse {

/// Grid and channel layout of the states a sampler produces.
struct FieldShape {
    Grid grid;
    std::vector<std::string> channels;
};

/// Strictly decreasing noise levels t_0 = sigma_max ... t_{N-1} = sigma_min,
/// closed by an exact 0.
struct TimeGrid {
    std::vector<double> nodes;

    int steps() const { return static_cast<int>(nodes.size()) - 1; }
    double t0() const { return nodes.front(); }
};

/// Karras-style spacing: t_i = (smax^(1/rho) + i/(n-1) (smin^(1/rho) -
/// smax^(1/rho)))^rho for i < n, then t_n = 0.
TimeGrid build_time_grid(int n, double sigma_min, double sigma_max, double rho = 7.0);

struct SamplerConfig {
    TimeGrid grid;
    double s_churn = 0.0;
    double s_tmin = 0.05;
    double s_tmax = 50.0;
    std::uint64_t seed = 0;
    /// Algorithm option: recompute the likelihood gradient at the corrector
    /// state (true) or reuse the predictor's (false).
    bool correction_reevaluates_likelihood = true;

    void validate() const;
};

/// Numerical failure inside a sampling run, tagged with the step and noise
/// level where the state stopped being finite.
struct SamplerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One deterministic step of the (guided) probability-flow solver from t_cur
/// to t_next: Euler predictor with drift (x - D(x;t))/t - lambda_g t s_l,
/// trapezoidal correction unless t_next = 0.
StateTensor heun_step(const Denoiser& denoiser, const StateTensor& x, double t_cur,
                      double t_next, const GuidanceConfig* guidance = nullptr);

/// Full deterministic trajectory from an explicit initial state at grid.t0().
StateTensor heun_trajectory(const Denoiser& denoiser, const StateTensor& x_init,
                            const TimeGrid& grid, const GuidanceConfig* guidance = nullptr);

/// Stochastic posterior sampler: per step, churn noise injection
/// (gamma_i = min(S_churn/N, sqrt(2)-1) inside [S_tmin, S_tmax]), guided Euler
/// predictor, guided trapezoidal corrector away from t = 0. With an empty
/// guidance config this is unconditional sampling from the prior.
StateTensor posterior_sample(const Denoiser& denoiser, const FieldShape& shape,
                             const SamplerConfig& config, const GuidanceConfig& guidance,
                             CounterRng& rng);

/// Seeds a stream from config.seed and samples.
StateTensor posterior_sample(const Denoiser& denoiser, const FieldShape& shape,
                             const SamplerConfig& config, const GuidanceConfig& guidance);

struct EnsembleResult {
    std::vector<StateTensor> members;
    StateTensor mean;
    StateTensor std;  // population standard deviation, elementwise
    std::vector<std::uint64_t> seeds;
};

/// Independent members with per-member streams seeded base_seed + index;
/// deterministic for any thread count.
EnsembleResult generate_ensemble(const Denoiser& denoiser, const FieldShape& shape,
                                 const SamplerConfig& config, const GuidanceConfig& guidance,
                                 int count, std::uint64_t base_seed, int threads = 1);

/// Writes member_<k>.fld, mean.fld, std.fld and manifest.json (seeds plus the
/// caller's config hash) into a directory.
void write_ensemble(const EnsembleResult& ensemble, const std::filesystem::path& dir,
                    const std::string& config_hash);

}  // namespace scorefuse
