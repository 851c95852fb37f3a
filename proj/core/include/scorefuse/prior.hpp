#pragma once

#include <memory>
#include <span>
#include <vector>

#include "scorefuse/fields.hpp"
#include "scorefuse/rng.hpp"

namespace scorefuse {

/// Noise-level range of the diffusion process. The time variable and the
/// noise level coincide (sigma(t) = t) and the state scaling is identity.
struct NoiseSchedule {
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double sigma_data = 1.0;

    void validate() const;
};

/// Input/output scalings that keep the raw network working at unit variance:
///   c_skip = sd^2/(s^2+sd^2),  c_out = s*sd/sqrt(s^2+sd^2),
///   c_in   = 1/sqrt(s^2+sd^2), c_noise = ln(s)/4.
struct PreconditionCoeffs {
    double c_skip = 0.0;
    double c_out = 0.0;
    double c_in = 0.0;
    double c_noise = 0.0;
};

PreconditionCoeffs precondition_coeffs(double sigma, double sigma_data = 1.0);

/// Raw trainable core F(x_scaled; c_noise) living inside the preconditioning
/// wrapper.
class RawNetwork {
public:
    virtual ~RawNetwork() = default;
    virtual StateTensor forward(const StateTensor& x_scaled, double c_noise) const = 0;
};

/// Wraps a raw network into the denoising parameterization
///   D(x; s) = c_skip(s)*x + c_out(s)*F(c_in(s)*x; c_noise(s)).
StateTensor precondition(const RawNetwork& raw, const StateTensor& x, double sigma,
                         double sigma_data = 1.0);

/// Clean-state estimator D(x; sigma) with the action of its transposed
/// Jacobian. Implementations are immutable and safe to call concurrently.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual StateTensor denoise(const StateTensor& x, double sigma) const = 0;
    virtual StateTensor vjp(const StateTensor& x, double sigma,
                            const StateTensor& cotangent) const = 0;
};

/// Score estimate (D(x;sigma) - x) / sigma^2.
StateTensor score_from_denoiser(const Denoiser& denoiser, const StateTensor& x, double sigma);

struct GmmComponent {
    double weight = 1.0;
    StateTensor mean;
    double stddev = 1.0;  // isotropic per-entry standard deviation
};

/// Isotropic Gaussian mixture over full states. Serves as an analytically
/// tractable stand-in for a learned prior: its noised density, posterior mean
/// and Jacobian all have closed forms.
class GaussianMixturePrior {
public:
    explicit GaussianMixturePrior(std::vector<GmmComponent> components);

    const std::vector<GmmComponent>& components() const { return components_; }
    const Grid& grid() const { return components_.front().mean.grid(); }
    const std::vector<std::string>& channels() const {
        return components_.front().mean.channels();
    }

    /// log p_sigma(x): density of the mixture convolved with N(0, sigma^2 I).
    double log_density(const StateTensor& x, double sigma) const;

    /// Posterior responsibilities of each component at noise level sigma,
    /// computed in log space with max subtraction.
    std::vector<double> responsibilities(const StateTensor& x, double sigma) const;

    StateTensor sample(CounterRng& rng) const;

private:
    std::vector<GmmComponent> components_;
};

/// Exact posterior-mean denoiser of a Gaussian mixture prior:
///   D(x; s) = sum_k r_k(x) * (s_k^2 x + s^2 m_k) / (s_k^2 + s^2),
/// with D(x; 0) = x. vjp is the exact transposed Jacobian.
class GmmDenoiser final : public Denoiser {
public:
    explicit GmmDenoiser(GaussianMixturePrior prior) : prior_(std::move(prior)) {}

    const GaussianMixturePrior& prior() const { return prior_; }

    StateTensor denoise(const StateTensor& x, double sigma) const override;
    StateTensor vjp(const StateTensor& x, double sigma,
                    const StateTensor& cotangent) const override;

private:
    GaussianMixturePrior prior_;
};

/// Convenience forms mirroring the operation-level contracts.
StateTensor gmm_denoise(const GaussianMixturePrior& prior, const StateTensor& x, double sigma);
StateTensor gmm_vjp(const GaussianMixturePrior& prior, const StateTensor& x, double sigma,
                    const StateTensor& cotangent);

/// Draws a training noise level: ln(sigma) ~ N(p_mean, p_std^2).
double sample_training_sigma(CounterRng& rng, double p_mean = -0.5, double p_std = 1.5);

/// Denoising score-matching objective: mean over the batch of
/// lambda(sigma) * ||x0 - D(x0 + sigma n; sigma)||^2 with
/// lambda(sigma) = 1/c_out(sigma)^2 and fresh (sigma, n) per element.
double edm_loss(const Denoiser& denoiser, std::span<const StateTensor> batch, CounterRng& rng,
                double sigma_data = 1.0, double p_mean = -0.5, double p_std = 1.5);

/// Identity baseline D(x) = x, the reference point for training progress.
class IdentityDenoiser final : public Denoiser {
public:
    StateTensor denoise(const StateTensor& x, double /*sigma*/) const override { return x; }
    StateTensor vjp(const StateTensor& /*x*/, double /*sigma*/,
                    const StateTensor& cotangent) const override {
        return cotangent;
    }
};

/// GMM prior persistence: JSON descriptor referencing FLD1 mean fields.
void save_gmm(const GaussianMixturePrior& prior, const std::filesystem::path& json_path);
GaussianMixturePrior load_gmm(const std::filesystem::path& json_path);

}  // namespace scorefuse
