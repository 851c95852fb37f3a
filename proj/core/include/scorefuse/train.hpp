#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "scorefuse/prior.hpp"

namespace scorefuse {

/// Raised when the training loss stops being finite.
struct TrainingDivergence : std::runtime_error {
    explicit TrainingDivergence(int step)
        : std::runtime_error("training diverged at step " + std::to_string(step)), step(step) {}
    int step;
};

/// Small trainable denoiser: a per-pixel MLP over a square neighborhood of
/// the scaled input plus positional and noise-level features, inside the
/// standard preconditioning wrapper. Forward and reverse passes are written
/// out by hand; vjp is the exact input-Jacobian action used for guidance.
class TinyDenoiser final : public Denoiser {
public:
    TinyDenoiser(int channel_count, int hidden, int patch_radius, double sigma_data,
                 std::uint64_t init_seed);

    StateTensor denoise(const StateTensor& x, double sigma) const override;
    StateTensor vjp(const StateTensor& x, double sigma,
                    const StateTensor& cotangent) const override;

    int channel_count() const { return channels_; }
    int hidden() const { return hidden_; }
    int patch_radius() const { return radius_; }
    double sigma_data() const { return sigma_data_; }
    std::size_t parameter_count() const { return weights_.size(); }

    std::span<const double> weights() const { return weights_; }
    std::span<double> weights() { return weights_; }

    int feature_count() const { return features_; }

    /// Accumulates the loss gradient for one (x0, sigma, noise) sample and
    /// returns the sample's weighted squared error. Exposed for the trainer.
    double accumulate_gradient(const StateTensor& x0, double sigma, const StateTensor& noise,
                               std::span<double> grad) const;

private:
    int channels_;
    int hidden_;
    int radius_;
    int features_;
    double sigma_data_;
    std::vector<double> weights_;  // [W1 | b1 | W2 | b2]

    void gather_features(const StateTensor& scaled, int y, int x, double c_noise,
                         std::span<double> out) const;
};

struct TrainConfig {
    int hidden = 64;
    int patch_radius = 1;
    int steps = 1500;
    int batch = 8;
    double learning_rate = 0.4;
    double grad_clip = 1.0;  // cap on the L2 norm of the averaged gradient
    double sigma_data = 1.0;
    double p_mean = -0.5;
    double p_std = 1.5;
    std::uint64_t seed = 0;
};

struct TrainResult {
    TinyDenoiser denoiser;
    std::vector<double> trace;  // per-step minibatch loss (per-element scale)
};

/// Plain seeded SGD with a gradient-norm cap over normalized fields.
/// Deterministic given the seed; throws TrainingDivergence when the loss
/// stops being finite.
TrainResult train_denoiser(const TrainConfig& config, std::span<const StateTensor> dataset);

/// Checkpoint container (magic "SFCK"): hyperparameters, schedule bounds,
/// per-channel normalization stats and raw float64 weights. Round-trips
/// bit-exactly.
void save_checkpoint(const TinyDenoiser& denoiser, const NormStats& stats,
                     const NoiseSchedule& schedule, const std::vector<std::string>& channels,
                     const std::filesystem::path& path);

struct Checkpoint {
    TinyDenoiser denoiser;
    NormStats stats;
    NoiseSchedule schedule;
    std::vector<std::string> channels;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace scorefuse
