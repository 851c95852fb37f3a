#include "scorefuse/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace scorefuse {

namespace {

constexpr char kCkptMagic[4] = {'S', 'F', 'C', 'K'};

inline int wrap_x(int x, int w) {
    int m = x % w;
    if (m < 0) m += w;
    return m;
}

inline int clamp_y(int y, int h) { return std::clamp(y, 0, h - 1); }

}  // namespace

TinyDenoiser::TinyDenoiser(int channel_count, int hidden, int patch_radius, double sigma_data,
                           std::uint64_t init_seed)
    : channels_(channel_count), hidden_(hidden), radius_(patch_radius),
      sigma_data_(sigma_data) {
    if (channels_ < 1 || hidden_ < 1 || radius_ < 0) {
        throw std::invalid_argument("bad TinyDenoiser hyperparameters");
    }
    const int side = 2 * radius_ + 1;
    features_ = channels_ * side * side + 4;  // patch + sin x + cos x + y + c_noise
    const std::size_t count = static_cast<std::size_t>(hidden_) * features_ + hidden_ +
                              static_cast<std::size_t>(channels_) * hidden_ + channels_;
    weights_.resize(count);
    CounterRng rng(init_seed);
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(features_));
    const double w2_scale = 1.0 / std::sqrt(static_cast<double>(hidden_));
    std::size_t i = 0;
    for (int k = 0; k < hidden_ * features_; ++k) weights_[i++] = w1_scale * rng.normal();
    for (int k = 0; k < hidden_; ++k) weights_[i++] = 0.0;
    for (int k = 0; k < channels_ * hidden_; ++k) weights_[i++] = w2_scale * rng.normal();
    for (int k = 0; k < channels_; ++k) weights_[i++] = 0.0;
}

void TinyDenoiser::gather_features(const StateTensor& scaled, int y, int x, double c_noise,
                                   std::span<double> out) const {
    const Grid& g = scaled.grid();
    std::size_t i = 0;
    for (int c = 0; c < channels_; ++c) {
        for (int dy = -radius_; dy <= radius_; ++dy) {
            const int yy = clamp_y(y + dy, g.height);
            for (int dx = -radius_; dx <= radius_; ++dx) {
                out[i++] = scaled(c, yy, wrap_x(x + dx, g.width));
            }
        }
    }
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(x) / g.width;
    out[i++] = std::sin(ang);
    out[i++] = std::cos(ang);
    out[i++] = static_cast<double>(y) / (g.height - 1);
    out[i++] = c_noise;
}

StateTensor TinyDenoiser::denoise(const StateTensor& x, double sigma) const {
    if (x.channel_count() != channels_) {
        throw DimensionError("denoiser trained for " + std::to_string(channels_) +
                             " channels, got " + std::to_string(x.channel_count()));
    }
    const PreconditionCoeffs pc = precondition_coeffs(sigma, sigma_data_);
    StateTensor scaled = lin_comb(x, pc.c_in, x, 0.0);
    const Grid& g = x.grid();
    const double* w1 = weights_.data();
    const double* b1 = w1 + static_cast<std::size_t>(hidden_) * features_;
    const double* w2 = b1 + hidden_;
    const double* b2 = w2 + static_cast<std::size_t>(channels_) * hidden_;

    StateTensor out = lin_comb(x, pc.c_skip, x, 0.0);
    std::vector<double> feat(features_);
    std::vector<double> act(hidden_);
    for (int y = 0; y < g.height; ++y) {
        for (int xx = 0; xx < g.width; ++xx) {
            gather_features(scaled, y, xx, pc.c_noise, feat);
            for (int h = 0; h < hidden_; ++h) {
                double z = b1[h];
                const double* row = w1 + static_cast<std::size_t>(h) * features_;
                for (int f = 0; f < features_; ++f) z += row[f] * feat[f];
                act[h] = std::tanh(z);
            }
            for (int c = 0; c < channels_; ++c) {
                double z = b2[c];
                const double* row = w2 + static_cast<std::size_t>(c) * hidden_;
                for (int h = 0; h < hidden_; ++h) z += row[h] * act[h];
                out.at(c, y, xx) += pc.c_out * z;
            }
        }
    }
    return out;
}

StateTensor TinyDenoiser::vjp(const StateTensor& x, double sigma,
                              const StateTensor& cotangent) const {
    if (!cotangent.same_shape(x)) throw DimensionError("vjp: cotangent shape mismatch");
    const PreconditionCoeffs pc = precondition_coeffs(sigma, sigma_data_);
    StateTensor scaled = lin_comb(x, pc.c_in, x, 0.0);
    const Grid& g = x.grid();
    const double* w1 = weights_.data();
    const double* b1 = w1 + static_cast<std::size_t>(hidden_) * features_;
    const double* w2 = b1 + hidden_;

    StateTensor grad = lin_comb(cotangent, pc.c_skip, cotangent, 0.0);
    std::vector<double> feat(features_);
    std::vector<double> act(hidden_);
    std::vector<double> g_hidden(hidden_);
    std::vector<double> g_feat(features_);
    for (int y = 0; y < g.height; ++y) {
        for (int xx = 0; xx < g.width; ++xx) {
            gather_features(scaled, y, xx, pc.c_noise, feat);
            for (int h = 0; h < hidden_; ++h) {
                double z = b1[h];
                const double* row = w1 + static_cast<std::size_t>(h) * features_;
                for (int f = 0; f < features_; ++f) z += row[f] * feat[f];
                act[h] = std::tanh(z);
            }
            // cotangent on this pixel's raw output, scaled by c_out
            std::fill(g_hidden.begin(), g_hidden.end(), 0.0);
            for (int c = 0; c < channels_; ++c) {
                const double go = pc.c_out * cotangent(c, y, xx);
                if (go == 0.0) continue;
                const double* row = w2 + static_cast<std::size_t>(c) * hidden_;
                for (int h = 0; h < hidden_; ++h) g_hidden[h] += row[h] * go;
            }
            for (int h = 0; h < hidden_; ++h) g_hidden[h] *= 1.0 - act[h] * act[h];
            std::fill(g_feat.begin(), g_feat.end(), 0.0);
            for (int h = 0; h < hidden_; ++h) {
                const double gh = g_hidden[h];
                if (gh == 0.0) continue;
                const double* row = w1 + static_cast<std::size_t>(h) * features_;
                for (int f = 0; f < features_; ++f) g_feat[f] += row[f] * gh;
            }
            // scatter patch features back; positional/noise features carry no
            // input dependence
            std::size_t i = 0;
            for (int c = 0; c < channels_; ++c) {
                for (int dy = -radius_; dy <= radius_; ++dy) {
                    const int yy = clamp_y(y + dy, g.height);
                    for (int dx = -radius_; dx <= radius_; ++dx) {
                        grad.at(c, yy, wrap_x(xx + dx, g.width)) += pc.c_in * g_feat[i++];
                    }
                }
            }
        }
    }
    return grad;
}

double TinyDenoiser::accumulate_gradient(const StateTensor& x0, double sigma,
                                         const StateTensor& noise,
                                         std::span<double> grad) const {
    if (grad.size() != weights_.size()) {
        throw std::invalid_argument("gradient buffer size mismatch");
    }
    const PreconditionCoeffs pc = precondition_coeffs(sigma, sigma_data_);
    StateTensor noisy = x0;
    add_scaled(noisy, noise, sigma);
    StateTensor scaled = lin_comb(noisy, pc.c_in, noisy, 0.0);
    const Grid& g = x0.grid();
    const double* w1 = weights_.data();
    const double* b1 = w1 + static_cast<std::size_t>(hidden_) * features_;
    const double* w2 = b1 + hidden_;
    const double* b2 = w2 + static_cast<std::size_t>(channels_) * hidden_;
    double* g_w1 = grad.data();
    double* g_b1 = g_w1 + static_cast<std::size_t>(hidden_) * features_;
    double* g_w2 = g_b1 + hidden_;
    double* g_b2 = g_w2 + static_cast<std::size_t>(channels_) * hidden_;

    const double lambda = 1.0 / (pc.c_out * pc.c_out);
    std::vector<double> feat(features_);
    std::vector<double> act(hidden_);
    std::vector<double> g_hidden(hidden_);
    double loss = 0.0;
    for (int y = 0; y < g.height; ++y) {
        for (int xx = 0; xx < g.width; ++xx) {
            gather_features(scaled, y, xx, pc.c_noise, feat);
            for (int h = 0; h < hidden_; ++h) {
                double z = b1[h];
                const double* row = w1 + static_cast<std::size_t>(h) * features_;
                for (int f = 0; f < features_; ++f) z += row[f] * feat[f];
                act[h] = std::tanh(z);
            }
            std::fill(g_hidden.begin(), g_hidden.end(), 0.0);
            for (int c = 0; c < channels_; ++c) {
                double raw = b2[c];
                const double* row = w2 + static_cast<std::size_t>(c) * hidden_;
                for (int h = 0; h < hidden_; ++h) raw += row[h] * act[h];
                const double d = pc.c_skip * noisy(c, y, xx) + pc.c_out * raw;
                const double resid = x0(c, y, xx) - d;
                loss += lambda * resid * resid;
                // dL/draw = -2 lambda c_out resid = -2 resid / c_out
                const double g_raw = -2.0 * resid / pc.c_out;
                g_b2[c] += g_raw;
                double* g_row = g_w2 + static_cast<std::size_t>(c) * hidden_;
                for (int h = 0; h < hidden_; ++h) {
                    g_row[h] += g_raw * act[h];
                    g_hidden[h] += w2[static_cast<std::size_t>(c) * hidden_ + h] * g_raw;
                }
            }
            for (int h = 0; h < hidden_; ++h) {
                const double gz = g_hidden[h] * (1.0 - act[h] * act[h]);
                if (gz == 0.0) continue;
                g_b1[h] += gz;
                double* g_row = g_w1 + static_cast<std::size_t>(h) * features_;
                for (int f = 0; f < features_; ++f) g_row[f] += gz * feat[f];
            }
        }
    }
    return loss;
}

TrainResult train_denoiser(const TrainConfig& config, std::span<const StateTensor> dataset) {
    if (dataset.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
    const StateTensor& first = dataset.front();
    for (const auto& f : dataset) {
        if (!f.same_shape(first)) throw DimensionError("training fields disagree on layout");
    }
    TinyDenoiser net(first.channel_count(), config.hidden, config.patch_radius,
                     config.sigma_data, config.seed ^ 0xA5A5A5A5ULL);
    CounterRng rng(config.seed);
    const std::size_t n_params = net.parameter_count();
    std::vector<double> grad(n_params);
    std::vector<double> trace;
    trace.reserve(config.steps);
    const double per_element =
        static_cast<double>(first.size()) * static_cast<double>(config.batch);
    StateTensor noise(first.grid(), first.channels());
    for (int step = 0; step < config.steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < config.batch; ++b) {
            const std::size_t pick =
                static_cast<std::size_t>(rng.uniform() * static_cast<double>(dataset.size()));
            const double sigma = sample_training_sigma(rng, config.p_mean, config.p_std);
            rng.fill_normal(noise.data());
            loss += net.accumulate_gradient(dataset[pick], sigma, noise, grad);
        }
        loss /= per_element;
        if (!std::isfinite(loss)) throw TrainingDivergence(step);
        trace.push_back(loss);

        double norm = 0.0;
        for (double gv : grad) norm += gv * gv;
        norm = std::sqrt(norm) / per_element;
        double scale = config.learning_rate / per_element;
        if (config.grad_clip > 0.0 && norm > config.grad_clip) {
            scale *= config.grad_clip / norm;
        }
        double* w = net.weights().data();
        for (std::size_t i = 0; i < n_params; ++i) w[i] -= scale * grad[i];
    }
    return {std::move(net), std::move(trace)};
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw TruncationError("checkpoint: " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is, const std::string& what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw TruncationError("checkpoint: " + what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
    const std::uint32_t len = get_u32(is, "string length");
    std::string s(len, '\0');
    if (len > 0 && !is.read(s.data(), len)) throw TruncationError("checkpoint: string body");
    return s;
}

}  // namespace

void save_checkpoint(const TinyDenoiser& denoiser, const NormStats& stats,
                     const NoiseSchedule& schedule, const std::vector<std::string>& channels,
                     const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os.write(kCkptMagic, 4);
    put_u32(os, 1);  // version
    put_u32(os, static_cast<std::uint32_t>(denoiser.channel_count()));
    put_u32(os, static_cast<std::uint32_t>(denoiser.hidden()));
    put_u32(os, static_cast<std::uint32_t>(denoiser.patch_radius()));
    put_f64(os, denoiser.sigma_data());
    put_f64(os, schedule.sigma_min);
    put_f64(os, schedule.sigma_max);
    put_u32(os, static_cast<std::uint32_t>(channels.size()));
    for (const auto& name : channels) {
        put_str(os, name);
        const ChannelStats* cs = stats.find(name);
        put_f64(os, cs != nullptr ? cs->mean : 0.0);
        put_f64(os, cs != nullptr ? cs->std : 1.0);
    }
    put_u32(os, static_cast<std::uint32_t>(denoiser.weights().size()));
    for (double w : denoiser.weights()) put_f64(os, w);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    char magic[4];
    if (!is.read(magic, 4)) throw TruncationError("checkpoint too short: " + path.string());
    if (std::memcmp(magic, kCkptMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic in " + path.string());
    }
    const std::uint32_t version = get_u32(is, "version");
    if (version != 1) throw FormatError("unsupported checkpoint version");
    const std::uint32_t ch = get_u32(is, "channels");
    const std::uint32_t hidden = get_u32(is, "hidden");
    const std::uint32_t radius = get_u32(is, "radius");
    const double sigma_data = get_f64(is, "sigma_data");
    NoiseSchedule schedule;
    schedule.sigma_min = get_f64(is, "sigma_min");
    schedule.sigma_max = get_f64(is, "sigma_max");
    schedule.sigma_data = sigma_data;
    const std::uint32_t name_count = get_u32(is, "name count");
    std::vector<std::string> channels;
    NormStats stats;
    for (std::uint32_t i = 0; i < name_count; ++i) {
        std::string name = get_str(is);
        ChannelStats cs;
        cs.mean = get_f64(is, "mean");
        cs.std = get_f64(is, "std");
        stats.set(name, cs);
        channels.push_back(std::move(name));
    }
    TinyDenoiser net(static_cast<int>(ch), static_cast<int>(hidden), static_cast<int>(radius),
                     sigma_data, 0);
    const std::uint32_t w_count = get_u32(is, "weight count");
    if (w_count != net.parameter_count()) {
        throw FormatError("checkpoint weight count mismatch in " + path.string());
    }
    for (std::uint32_t i = 0; i < w_count; ++i) net.weights()[i] = get_f64(is, "weight");
    return {std::move(net), std::move(stats), schedule, std::move(channels)};
}

}  // namespace scorefuse
