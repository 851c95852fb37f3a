#include "scorefuse/assimilate.hpp"

#include <cmath>
#include <fstream>

#include "scorefuse/diagnostics.hpp"

namespace scorefuse {

void FusionSchedule::validate() const {
    if (interval < 1) throw std::invalid_argument("assimilation interval must be >= 1");
    if (cycles < 1) throw std::invalid_argument("need at least one cycle");
    if (!use_emulator.empty() && static_cast<int>(use_emulator.size()) != cycles) {
        throw std::invalid_argument("emulator availability pattern length != cycles");
    }
    if (!use_points.empty() && static_cast<int>(use_points.size()) != cycles) {
        throw std::invalid_argument("point availability pattern length != cycles");
    }
}

namespace {

struct FusionDriver {
    const Denoiser& denoiser;
    const Emulator& emulator;
    std::span<const PointObsFrame> obs;
    const FusionSchedule& schedule;
    const SamplerConfig& sampler;
    const FusionConfig& fusion;
    const FieldShape& fine_shape;
    bool reinitialize;

    FusionResult run(const StateTensor& init_coarse) {
        schedule.validate();
        if (static_cast<int>(obs.size()) < schedule.cycles) {
            throw std::invalid_argument("observation sequence shorter than schedule (" +
                                        std::to_string(obs.size()) + " frames for " +
                                        std::to_string(schedule.cycles) + " cycles)");
        }
        const int factor = emulator.grid_factor();
        const CoarsenOp to_coarse(fine_shape.grid, fine_shape.channels, factor, factor);
        if (init_coarse.grid() != to_coarse.coarse_grid()) {
            throw DimensionError("emulator initial condition is not on the emulator grid");
        }

        FusionResult result;
        StateTensor coarse = init_coarse;
        int lead = 0;
        for (int cycle = 0; cycle < schedule.cycles; ++cycle) {
            for (int s = 0; s < schedule.interval; ++s) coarse = emulator.step(coarse);
            lead += schedule.interval;
            result.emulator_states.push_back(coarse);

            GuidanceConfig guidance;
            guidance.lambda_g = 1.0;
            guidance.auto_clip = true;
            if (schedule.emulator_at(cycle)) {
                GuidanceTerm term;
                term.op = std::make_shared<CoarsenOp>(to_coarse);
                term.y = flatten_observation(coarse);
                term.sigma_y = fusion.coarse_sigma_y;
                term.gamma_hat = fusion.coarse_gamma_hat;
                term.weight = 1.0;
                guidance.terms.push_back(std::move(term));
            }
            if (schedule.points_at(cycle) && !obs[cycle].points.empty()) {
                GuidanceTerm term;
                term.op = std::make_shared<PointSamplingOp>(fine_shape.grid,
                                                            fine_shape.channels,
                                                            obs[cycle].points);
                term.y = obs[cycle].values;
                term.sigma_y = fusion.point_sigma_y;
                term.gamma_hat = fusion.point_gamma_hat;
                term.weight = fusion.lambda;
                guidance.terms.push_back(std::move(term));
            }

            if (guidance.terms.empty()) continue;  // nothing to assimilate this cycle

            const std::uint64_t cycle_seed =
                fusion.base_seed + static_cast<std::uint64_t>(cycle + 1) * 0x100000ULL;
            EnsembleResult ens = generate_ensemble(denoiser, fine_shape, sampler, guidance,
                                                   fusion.members, cycle_seed, fusion.threads);
            if (reinitialize) {
                coarse = to_coarse.apply_as_state(ens.mean);
            }
            result.reconstructions.push_back(std::move(ens));
            result.leads.push_back(lead);
        }
        return result;
    }
};

}  // namespace

FusionResult fuse_precomputed(const Denoiser& denoiser, const Emulator& emulator,
                              const StateTensor& init_coarse,
                              std::span<const PointObsFrame> obs_sequence,
                              const FusionSchedule& schedule, const SamplerConfig& sampler,
                              const FusionConfig& fusion, const FieldShape& fine_shape) {
    FusionDriver driver{denoiser, emulator, obs_sequence, schedule,
                        sampler,  fusion,   fine_shape,   false};
    return driver.run(init_coarse);
}

FusionResult fuse_reinitialized(const Denoiser& denoiser, const Emulator& emulator,
                                const StateTensor& init_coarse,
                                std::span<const PointObsFrame> obs_sequence,
                                const FusionSchedule& schedule, const SamplerConfig& sampler,
                                const FusionConfig& fusion, const FieldShape& fine_shape) {
    FusionDriver driver{denoiser, emulator, obs_sequence, schedule,
                        sampler,  fusion,   fine_shape,   true};
    return driver.run(init_coarse);
}

void write_fusion_rmse_csv(std::span<const FusionRmseRow> rows,
                           const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "lead,channel,method,rmse_mean,rmse_std\n";
    os.precision(17);
    for (const FusionRmseRow& r : rows) {
        os << r.lead << ',' << r.channel << ',' << r.method << ',' << r.rmse_mean << ','
           << r.rmse_std << '\n';
    }
}

FusionRmseRow summarize_member_rmse(const EnsembleResult& ensemble, const StateTensor& truth,
                                    const std::string& channel, const std::string& method,
                                    int lead) {
    FusionRmseRow row;
    row.lead = lead;
    row.channel = channel;
    row.method = method;
    std::vector<double> errs;
    errs.reserve(ensemble.members.size());
    for (const StateTensor& m : ensemble.members) {
        errs.push_back(channel == "all" ? rmse(m, truth) : rmse(m, truth, channel));
    }
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    row.rmse_mean = mean;
    row.rmse_std = errs.size() > 1 ? std::sqrt(var / static_cast<double>(errs.size())) : 0.0;
    return row;
}

}  // namespace scorefuse
