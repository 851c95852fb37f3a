#pragma once

#include <filesystem>
#include <vector>

#include "scorefuse/emulator.hpp"
#include "scorefuse/measure.hpp"
#include "scorefuse/sampler.hpp"

namespace scorefuse {

/// Availability of each modality per assimilation cycle. Empty patterns mean
/// "available at every cycle".
struct FusionSchedule {
    int interval = 2;  // emulator steps between guided reconstructions
    int cycles = 1;
    std::vector<bool> use_emulator;
    std::vector<bool> use_points;

    void validate() const;
    bool emulator_at(int cycle) const {
        return use_emulator.empty() || use_emulator[cycle];
    }
    bool points_at(int cycle) const { return use_points.empty() || use_points[cycle]; }
};

/// Sparse observations for one assimilation time.
struct PointObsFrame {
    PointSet points;
    std::vector<double> values;
};

/// Noise settings and weights for the two fusion modalities plus ensemble
/// bookkeeping. `lambda` weights the sparse-point term relative to the
/// emulator term in the combined score.
struct FusionConfig {
    double coarse_sigma_y = kCoarseSigmaY;
    double coarse_gamma_hat = kCoarseGammaHat;
    double point_sigma_y = kPointSigmaY;
    double point_gamma_hat = kPointGammaHat;
    double lambda = 1.0;
    int members = 8;
    std::uint64_t base_seed = 0;
    int threads = 1;
};

struct FusionResult {
    std::vector<EnsembleResult> reconstructions;  // one per assimilated cycle
    std::vector<int> leads;                       // emulator steps at each reconstruction
    std::vector<StateTensor> emulator_states;     // coarse forecast at each cycle
};

/// Precomputed-forecast fusion: the emulator free-runs from its initial
/// condition; at every cycle its current forecast (through the coarsening
/// operator) and the sparse observations guide an independent reconstruction.
/// Reconstructions never feed back into the emulator.
FusionResult fuse_precomputed(const Denoiser& denoiser, const Emulator& emulator,
                              const StateTensor& init_coarse,
                              std::span<const PointObsFrame> obs_sequence,
                              const FusionSchedule& schedule, const SamplerConfig& sampler,
                              const FusionConfig& fusion, const FieldShape& fine_shape);

/// Reinitialized fusion: after each guided reconstruction the ensemble mean
/// is coarsened back onto the emulator grid and becomes the next initial
/// condition, closing the forecast-assimilation loop.
FusionResult fuse_reinitialized(const Denoiser& denoiser, const Emulator& emulator,
                                const StateTensor& init_coarse,
                                std::span<const PointObsFrame> obs_sequence,
                                const FusionSchedule& schedule, const SamplerConfig& sampler,
                                const FusionConfig& fusion, const FieldShape& fine_shape);

struct FusionRmseRow {
    int lead = 0;
    std::string channel;
    std::string method;
    double rmse_mean = 0.0;
    double rmse_std = 0.0;
};

/// Experiment manifest: comma-separated `lead,channel,method,rmse_mean,rmse_std`.
void write_fusion_rmse_csv(std::span<const FusionRmseRow> rows,
                           const std::filesystem::path& path);

/// Member-wise RMSE statistics of one reconstruction against a reference.
FusionRmseRow summarize_member_rmse(const EnsembleResult& ensemble, const StateTensor& truth,
                                    const std::string& channel, const std::string& method,
                                    int lead);

}  // namespace scorefuse
