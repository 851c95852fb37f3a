#include "scorefuse/sampler.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace scorefuse {

TimeGrid build_time_grid(int n, double sigma_min, double sigma_max, double rho) {
    if (n < 2) throw std::invalid_argument("time grid needs at least 2 steps");
    if (!(sigma_min > 0.0) || sigma_min >= sigma_max) {
        throw std::invalid_argument("time grid needs 0 < sigma_min < sigma_max");
    }
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    TimeGrid grid;
    grid.nodes.resize(n + 1);
    const double lo = std::pow(sigma_min, 1.0 / rho);
    const double hi = std::pow(sigma_max, 1.0 / rho);
    for (int i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / (n - 1);
        grid.nodes[i] = std::pow(hi + frac * (lo - hi), rho);
    }
    grid.nodes[n] = 0.0;
    for (int i = 0; i + 1 <= n; ++i) {
        if (!(grid.nodes[i] > grid.nodes[i + 1])) {
            throw std::invalid_argument("time grid is not strictly decreasing");
        }
    }
    return grid;
}

void SamplerConfig::validate() const {
    if (grid.nodes.size() < 2 || grid.nodes.back() != 0.0) {
        throw std::invalid_argument("sampler config needs a time grid ending at 0");
    }
    if (s_churn < 0.0) throw std::invalid_argument("S_churn must be >= 0");
    if (!(0.0 <= s_tmin && s_tmin <= s_tmax)) {
        throw std::invalid_argument("need 0 <= S_tmin <= S_tmax");
    }
}

namespace {

// Posterior drift d = (x - D(x;t))/t - lambda_g * t * s_l(x, t). The exact
// same routine backs both the deterministic stepper and the stochastic
// sampler so churn-free runs reduce to the Heun trajectory bit for bit.
StateTensor guided_drift(const Denoiser& denoiser, const StateTensor& x, double t,
                         const GuidanceConfig* guidance, double clip_norm,
                         double* prior_drift_norm = nullptr) {
    if (!(t > 0.0)) throw std::invalid_argument("drift evaluation needs t > 0");
    const StateTensor denoised = denoiser.denoise(x, t);
    StateTensor drift = lin_comb(x, 1.0 / t, denoised, -1.0 / t);
    if (prior_drift_norm != nullptr) *prior_drift_norm = l2_norm(drift);
    if (guidance != nullptr && guidance->active()) {
        StateTensor score = fuse_scores(guidance->terms, denoiser, x, t);
        if (clip_norm > 0.0) score = clip_gradient(score, clip_norm);
        add_scaled(drift, score, -guidance->lambda_g * t);
    }
    return drift;
}

StateTensor step_from(const Denoiser& denoiser, const StateTensor& x, const StateTensor& d_cur,
                      double t_cur, double t_next, const GuidanceConfig* guidance,
                      double clip_norm) {
    const double dt = t_next - t_cur;
    StateTensor x_pred = x;
    add_scaled(x_pred, d_cur, dt);
    if (t_next == 0.0) return x_pred;
    const StateTensor d_next = guided_drift(denoiser, x_pred, t_next, guidance, clip_norm);
    StateTensor out = x;
    add_scaled(out, d_cur, 0.5 * dt);
    add_scaled(out, d_next, 0.5 * dt);
    return out;
}

double resolve_clip(const GuidanceConfig* guidance, double first_prior_drift_norm) {
    if (guidance == nullptr) return 0.0;
    if (guidance->auto_clip) return 10.0 * first_prior_drift_norm;
    return guidance->clip_norm;
}

}  // namespace

StateTensor heun_step(const Denoiser& denoiser, const StateTensor& x, double t_cur,
                      double t_next, const GuidanceConfig* guidance) {
    if (!(t_cur > 0.0)) throw std::invalid_argument("heun_step: t_cur must be > 0");
    if (!(t_next >= 0.0) || !(t_cur > t_next)) {
        throw std::invalid_argument("heun_step: need t_cur > t_next >= 0");
    }
    const double clip = (guidance != nullptr) ? guidance->clip_norm : 0.0;
    const StateTensor d = guided_drift(denoiser, x, t_cur, guidance, clip);
    return step_from(denoiser, x, d, t_cur, t_next, guidance, clip);
}

StateTensor heun_trajectory(const Denoiser& denoiser, const StateTensor& x_init,
                            const TimeGrid& grid, const GuidanceConfig* guidance) {
    StateTensor x = x_init;
    double clip = (guidance != nullptr && !guidance->auto_clip) ? guidance->clip_norm : 0.0;
    for (int i = 0; i + 1 < static_cast<int>(grid.nodes.size()); ++i) {
        double prior_norm = 0.0;
        const StateTensor d =
            guided_drift(denoiser, x, grid.nodes[i], guidance, clip, &prior_norm);
        if (i == 0 && guidance != nullptr && guidance->auto_clip) {
            clip = resolve_clip(guidance, prior_norm);
            // first drift was computed unclipped; recompute with the clip active
            const StateTensor d0 = guided_drift(denoiser, x, grid.nodes[i], guidance, clip);
            x = step_from(denoiser, x, d0, grid.nodes[i], grid.nodes[i + 1], guidance, clip);
            continue;
        }
        x = step_from(denoiser, x, d, grid.nodes[i], grid.nodes[i + 1], guidance, clip);
    }
    return x;
}

StateTensor posterior_sample(const Denoiser& denoiser, const FieldShape& shape,
                             const SamplerConfig& config, const GuidanceConfig& guidance,
                             CounterRng& rng) {
    config.validate();
    const std::vector<double>& t = config.grid.nodes;
    const int n = config.grid.steps();
    const double gamma_cap = std::sqrt(2.0) - 1.0;

    StateTensor x(shape.grid, shape.channels);
    rng.fill_normal(x.data());
    for (double& v : x.data()) v *= t[0];

    const GuidanceConfig* guide = guidance.empty() ? nullptr : &guidance;
    double clip = (guide != nullptr && !guide->auto_clip) ? guide->clip_norm : 0.0;
    bool clip_resolved = (guide == nullptr) || !guide->auto_clip;

    StateTensor eps(shape.grid, shape.channels);
    for (int i = 0; i < n; ++i) {
        double gamma = 0.0;
        if (config.s_churn > 0.0 && t[i] >= config.s_tmin && t[i] <= config.s_tmax) {
            gamma = std::min(config.s_churn / n, gamma_cap);
        }
        const double t_hat = t[i] + gamma * t[i];
        rng.fill_normal(eps.data());
        if (gamma > 0.0) {
            const double amp = std::sqrt(t_hat * t_hat - t[i] * t[i]);
            add_scaled(x, eps, amp);
        }

        double prior_norm = 0.0;
        StateTensor d = guided_drift(denoiser, x, t_hat, guide, clip, &prior_norm);
        if (!clip_resolved) {
            clip = resolve_clip(guide, prior_norm);
            clip_resolved = true;
            d = guided_drift(denoiser, x, t_hat, guide, clip);
        }

        const double dt = t[i + 1] - t_hat;
        StateTensor x_pred = x;
        add_scaled(x_pred, d, dt);
        if (t[i + 1] != 0.0) {
            StateTensor d_corr;
            if (config.correction_reevaluates_likelihood) {
                d_corr = guided_drift(denoiser, x_pred, t[i + 1], guide, clip);
            } else {
                const StateTensor denoised = denoiser.denoise(x_pred, t[i + 1]);
                d_corr = lin_comb(x_pred, 1.0 / t[i + 1], denoised, -1.0 / t[i + 1]);
                if (guide != nullptr && guide->active()) {
                    StateTensor score = fuse_scores(guide->terms, denoiser, x, t_hat);
                    if (clip > 0.0) score = clip_gradient(score, clip);
                    add_scaled(d_corr, score, -guide->lambda_g * t[i + 1]);
                }
            }
            StateTensor x_next = x;
            add_scaled(x_next, d, 0.5 * dt);
            add_scaled(x_next, d_corr, 0.5 * dt);
            x = std::move(x_next);
        } else {
            x = std::move(x_pred);
        }
        if (!x.all_finite()) {
            throw SamplerError("non-finite state at step " + std::to_string(i) +
                               " (t = " + std::to_string(t[i]) + ")");
        }
    }
    return x;
}

StateTensor posterior_sample(const Denoiser& denoiser, const FieldShape& shape,
                             const SamplerConfig& config, const GuidanceConfig& guidance) {
    CounterRng rng(config.seed);
    return posterior_sample(denoiser, shape, config, guidance, rng);
}

EnsembleResult generate_ensemble(const Denoiser& denoiser, const FieldShape& shape,
                                 const SamplerConfig& config, const GuidanceConfig& guidance,
                                 int count, std::uint64_t base_seed, int threads) {
    if (count < 1) throw std::invalid_argument("ensemble needs at least one member");
    if (threads < 1) threads = 1;
    EnsembleResult result;
    result.members.resize(count);
    result.seeds.resize(count);
    for (int k = 0; k < count; ++k) result.seeds[k] = derive_stream_seed(base_seed, k);

    std::atomic<int> next{0};
    std::vector<std::string> failures(count);
    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= count) return;
            try {
                CounterRng rng(result.seeds[k]);
                result.members[k] = posterior_sample(denoiser, shape, config, guidance, rng);
            } catch (const std::exception& e) {
                failures[k] = e.what();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (int k = 0; k < count; ++k) {
        if (!failures[k].empty()) {
            throw SamplerError("member " + std::to_string(k) + " failed: " + failures[k]);
        }
    }

    result.mean = StateTensor(shape.grid, shape.channels);
    for (const StateTensor& m : result.members) add_scaled(result.mean, m, 1.0 / count);
    result.std = StateTensor(shape.grid, shape.channels);
    if (count > 1) {
        double* ps = result.std.data().data();
        const double* pm = result.mean.data().data();
        for (const StateTensor& m : result.members) {
            const double* p = m.data().data();
            for (std::size_t i = 0; i < result.std.size(); ++i) {
                const double d = p[i] - pm[i];
                ps[i] += d * d;
            }
        }
        for (std::size_t i = 0; i < result.std.size(); ++i) {
            ps[i] = std::sqrt(ps[i] / count);
        }
    }
    return result;
}

void write_ensemble(const EnsembleResult& ensemble, const std::filesystem::path& dir,
                    const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["count"] = ensemble.members.size();
    manifest["config_hash"] = config_hash;
    manifest["seeds"] = ensemble.seeds;
    manifest["files"] = nlohmann::json::array();
    for (std::size_t k = 0; k < ensemble.members.size(); ++k) {
        const std::string name = "member_" + std::to_string(k) + ".fld";
        save_field(ensemble.members[k], dir / name);
        manifest["files"].push_back(name);
    }
    save_field(ensemble.mean, dir / "mean.fld");
    save_field(ensemble.std, dir / "std.fld");
    std::ofstream os(dir / "manifest.json");
    if (!os) throw std::runtime_error("cannot write ensemble manifest in " + dir.string());
    os << manifest.dump(2) << '\n';
}

}  // namespace scorefuse
