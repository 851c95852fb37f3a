#include "scorefuse/prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

namespace scorefuse {

void NoiseSchedule::validate() const {
    if (!(sigma_min > 0.0) || !(sigma_min < sigma_max)) {
        throw std::invalid_argument("noise schedule needs 0 < sigma_min < sigma_max");
    }
    if (!(sigma_data > 0.0)) throw std::invalid_argument("sigma_data must be positive");
}

PreconditionCoeffs precondition_coeffs(double sigma, double sigma_data) {
    if (!std::isfinite(sigma) || sigma <= 0.0) {
        throw std::invalid_argument("precondition_coeffs: sigma must be finite and positive");
    }
    const double s2 = sigma * sigma;
    const double d2 = sigma_data * sigma_data;
    const double denom = s2 + d2;
    PreconditionCoeffs c;
    c.c_skip = d2 / denom;
    c.c_out = sigma * sigma_data / std::sqrt(denom);
    c.c_in = 1.0 / std::sqrt(denom);
    c.c_noise = std::log(sigma) / 4.0;
    return c;
}

StateTensor precondition(const RawNetwork& raw, const StateTensor& x, double sigma,
                         double sigma_data) {
    const PreconditionCoeffs c = precondition_coeffs(sigma, sigma_data);
    StateTensor scaled = lin_comb(x, c.c_in, x, 0.0);
    StateTensor f = raw.forward(scaled, c.c_noise);
    if (!f.same_shape(x)) throw DimensionError("raw network changed the tensor shape");
    return lin_comb(x, c.c_skip, f, c.c_out);
}

StateTensor score_from_denoiser(const Denoiser& denoiser, const StateTensor& x, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("score_from_denoiser: sigma must be > 0");
    StateTensor d = denoiser.denoise(x, sigma);
    if (!d.same_shape(x)) throw DimensionError("denoiser output shape mismatch");
    return lin_comb(d, 1.0 / (sigma * sigma), x, -1.0 / (sigma * sigma));
}

GaussianMixturePrior::GaussianMixturePrior(std::vector<GmmComponent> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
    double total = 0.0;
    for (const auto& comp : components_) {
        if (comp.weight < 0.0) throw std::invalid_argument("mixture weights must be nonnegative");
        if (!(comp.stddev > 0.0)) throw std::invalid_argument("component stddev must be > 0");
        if (!comp.mean.same_shape(components_.front().mean)) {
            throw DimensionError("mixture component means disagree on layout");
        }
        total += comp.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("mixture weights must sum to 1 (got " +
                                    std::to_string(total) + ")");
    }
}

namespace {

// log w_k - P/2 log(2 pi v_k) - ||x - m_k||^2 / (2 v_k) with v_k = s_k^2 + sigma^2
std::vector<double> component_log_terms(const GaussianMixturePrior& prior, const StateTensor& x,
                                        double sigma) {
    const auto& comps = prior.components();
    const double p = static_cast<double>(x.size());
    std::vector<double> log_terms(comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const double v = comps[k].stddev * comps[k].stddev + sigma * sigma;
        double ss = 0.0;
        const double* px = x.data().data();
        const double* pm = comps[k].mean.data().data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = px[i] - pm[i];
            ss += d * d;
        }
        log_terms[k] = std::log(comps[k].weight) -
                       0.5 * p * std::log(2.0 * std::numbers::pi * v) - ss / (2.0 * v);
    }
    return log_terms;
}

}  // namespace

double GaussianMixturePrior::log_density(const StateTensor& x, double sigma) const {
    const std::vector<double> lt = component_log_terms(*this, x, sigma);
    const double m = *std::max_element(lt.begin(), lt.end());
    double acc = 0.0;
    for (double v : lt) acc += std::exp(v - m);
    return m + std::log(acc);
}

std::vector<double> GaussianMixturePrior::responsibilities(const StateTensor& x,
                                                           double sigma) const {
    std::vector<double> lt = component_log_terms(*this, x, sigma);
    const double m = *std::max_element(lt.begin(), lt.end());
    double total = 0.0;
    for (double& v : lt) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : lt) v /= total;
    return lt;
}

StateTensor GaussianMixturePrior::sample(CounterRng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = components_.size() - 1;
    for (std::size_t k = 0; k < components_.size(); ++k) {
        acc += components_[k].weight;
        if (u < acc) {
            pick = k;
            break;
        }
    }
    const GmmComponent& comp = components_[pick];
    StateTensor out = comp.mean;
    for (double& v : out.data()) v += comp.stddev * rng.normal();
    return out;
}

StateTensor gmm_denoise(const GaussianMixturePrior& prior, const StateTensor& x, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gmm_denoise: sigma must be >= 0");
    if (sigma == 0.0) return x;
    const auto& comps = prior.components();
    const std::vector<double> r = prior.responsibilities(x, sigma);
    StateTensor out = zeros_like(x);
    double* po = out.data().data();
    const double* px = x.data().data();
    const double s2 = sigma * sigma;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const double v = comps[k].stddev * comps[k].stddev;
        const double a = r[k] * v / (v + s2);
        const double b = r[k] * s2 / (v + s2);
        const double* pm = comps[k].mean.data().data();
        for (std::size_t i = 0; i < x.size(); ++i) po[i] += a * px[i] + b * pm[i];
    }
    return out;
}

StateTensor gmm_vjp(const GaussianMixturePrior& prior, const StateTensor& x, double sigma,
                    const StateTensor& cotangent) {
    if (sigma < 0.0) throw std::invalid_argument("gmm_vjp: sigma must be >= 0");
    if (!cotangent.same_shape(x)) throw DimensionError("gmm_vjp: cotangent shape mismatch");
    if (sigma == 0.0) return cotangent;
    const auto& comps = prior.components();
    const std::size_t n = x.size();
    const double s2 = sigma * sigma;
    const std::vector<double> r = prior.responsibilities(x, sigma);

    // D(x) = sum_k r_k a_k with a_k = (v_k x + s^2 m_k)/(v_k + s^2).
    // J^T u = (sum_k r_k beta_k) u + sum_k (a_k . u) grad r_k, where
    // grad r_k = r_k (u_k - sum_j r_j u_j) and u_k = (m_k - x)/(v_k + s^2).
    double beta_bar = 0.0;
    std::vector<double> a_dot_u(comps.size());
    StateTensor u_bar = zeros_like(x);  // sum_j r_j u_j
    const double* px = x.data().data();
    const double* pc = cotangent.data().data();
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const double v = comps[k].stddev * comps[k].stddev;
        const double denom = v + s2;
        beta_bar += r[k] * (v / denom);
        const double* pm = comps[k].mean.data().data();
        double acc = 0.0;
        double* pu = u_bar.data().data();
        for (std::size_t i = 0; i < n; ++i) {
            const double a_i = (v * px[i] + s2 * pm[i]) / denom;
            acc += a_i * pc[i];
            pu[i] += r[k] * (pm[i] - px[i]) / denom;
        }
        a_dot_u[k] = acc;
    }
    StateTensor out = lin_comb(cotangent, beta_bar, cotangent, 0.0);
    double* po = out.data().data();
    const double* pu = u_bar.data().data();
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const double v = comps[k].stddev * comps[k].stddev;
        const double denom = v + s2;
        const double scale = r[k] * a_dot_u[k];
        if (scale == 0.0) continue;
        const double* pm = comps[k].mean.data().data();
        for (std::size_t i = 0; i < n; ++i) {
            po[i] += scale * ((pm[i] - px[i]) / denom - pu[i]);
        }
    }
    return out;
}

StateTensor GmmDenoiser::denoise(const StateTensor& x, double sigma) const {
    return gmm_denoise(prior_, x, sigma);
}

StateTensor GmmDenoiser::vjp(const StateTensor& x, double sigma,
                             const StateTensor& cotangent) const {
    return gmm_vjp(prior_, x, sigma, cotangent);
}

double sample_training_sigma(CounterRng& rng, double p_mean, double p_std) {
    return std::exp(p_mean + p_std * rng.normal());
}

double edm_loss(const Denoiser& denoiser, std::span<const StateTensor> batch, CounterRng& rng,
                double sigma_data, double p_mean, double p_std) {
    if (batch.empty()) throw std::invalid_argument("edm_loss: empty batch");
    double total = 0.0;
    for (const StateTensor& x0 : batch) {
        const double sigma = sample_training_sigma(rng, p_mean, p_std);
        StateTensor noisy = x0;
        for (double& v : noisy.data()) v += sigma * rng.normal();
        const StateTensor d = denoiser.denoise(noisy, sigma);
        const double c_out = precondition_coeffs(sigma, sigma_data).c_out;
        double ss = 0.0;
        const double* pd = d.data().data();
        const double* p0 = x0.data().data();
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const double r = p0[i] - pd[i];
            ss += r * r;
        }
        total += ss / (c_out * c_out);
    }
    return total / static_cast<double>(batch.size());
}

void save_gmm(const GaussianMixturePrior& prior, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["weights"] = nlohmann::json::array();
    j["stddevs"] = nlohmann::json::array();
    j["means"] = nlohmann::json::array();
    const auto dir = json_path.parent_path();
    const auto stem = json_path.stem().string();
    for (std::size_t k = 0; k < prior.components().size(); ++k) {
        const auto& comp = prior.components()[k];
        const std::string mean_name = stem + "_mean" + std::to_string(k) + ".fld";
        save_field(comp.mean, dir / mean_name);
        j["weights"].push_back(comp.weight);
        j["stddevs"].push_back(comp.stddev);
        j["means"].push_back(mean_name);
    }
    std::ofstream os(json_path);
    if (!os) throw std::runtime_error("cannot open for writing: " + json_path.string());
    os << j.dump(2) << '\n';
}

GaussianMixturePrior load_gmm(const std::filesystem::path& json_path) {
    std::ifstream is(json_path);
    if (!is) throw std::runtime_error("cannot open for reading: " + json_path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad mixture descriptor " + json_path.string() + ": " + e.what());
    }
    const auto dir = json_path.parent_path();
    std::vector<GmmComponent> comps;
    const auto& weights = j.at("weights");
    const auto& stddevs = j.at("stddevs");
    const auto& means = j.at("means");
    if (weights.size() != stddevs.size() || weights.size() != means.size()) {
        throw FormatError("mixture descriptor arrays disagree in length: " + json_path.string());
    }
    for (std::size_t k = 0; k < weights.size(); ++k) {
        GmmComponent comp;
        comp.weight = weights[k].get<double>();
        comp.stddev = stddevs[k].get<double>();
        comp.mean = load_field(dir / means[k].get<std::string>());
        comps.push_back(std::move(comp));
    }
    return GaussianMixturePrior(std::move(comps));
}

}  // namespace scorefuse
