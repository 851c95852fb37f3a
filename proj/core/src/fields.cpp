#include "scorefuse/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace scorefuse {

void validate_grid(const Grid& grid) {
    if (grid.height < 4 || grid.width < 4) {
        throw DimensionError("grid must be at least 4x4, got " + std::to_string(grid.height) +
                             "x" + std::to_string(grid.width));
    }
}

StateTensor::StateTensor(Grid grid, std::vector<std::string> channels)
    : StateTensor(grid, std::move(channels), {}) {}

StateTensor::StateTensor(Grid grid, std::vector<std::string> channels, std::vector<double> data)
    : grid_(grid), channels_(std::move(channels)) {
    validate_grid(grid_);
    if (channels_.empty()) throw DimensionError("state tensor needs at least one channel");
    std::unordered_set<std::string_view> seen;
    for (const auto& name : channels_) {
        if (!seen.insert(name).second) {
            throw std::invalid_argument("duplicate channel name: " + name);
        }
    }
    const std::size_t expect =
        channels_.size() * static_cast<std::size_t>(grid_.height) * grid_.width;
    if (data.empty()) {
        data_.assign(expect, 0.0);
    } else if (data.size() == expect) {
        data_ = std::move(data);
    } else {
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match channels*height*width = " + std::to_string(expect));
    }
}

int StateTensor::channel_index(std::string_view name) const {
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (channels_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

bool StateTensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

NormStats::NormStats(std::vector<std::string> channels, std::vector<ChannelStats> stats)
    : channels_(std::move(channels)), stats_(std::move(stats)) {
    if (channels_.size() != stats_.size()) {
        throw std::invalid_argument("NormStats: channel/stat count mismatch");
    }
    for (const auto& s : stats_) {
        if (!(s.std > 0.0)) throw std::invalid_argument("NormStats: std must be positive");
    }
}

const ChannelStats* NormStats::find(std::string_view channel) const {
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (channels_[i] == channel) return &stats_[i];
    }
    return nullptr;
}

void NormStats::set(const std::string& channel, ChannelStats stats) {
    if (!(stats.std > 0.0)) throw std::invalid_argument("NormStats: std must be positive");
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (channels_[i] == channel) {
            stats_[i] = stats;
            return;
        }
    }
    channels_.push_back(channel);
    stats_.push_back(stats);
}

NormStats compute_norm_stats(std::span<const StateTensor> fields) {
    if (fields.empty()) throw std::invalid_argument("compute_norm_stats: empty field set");
    const StateTensor& first = fields.front();
    for (const auto& f : fields) {
        if (!f.same_shape(first)) {
            throw DimensionError("compute_norm_stats: fields disagree on layout");
        }
    }
    const int c_count = first.channel_count();
    const std::size_t plane =
        static_cast<std::size_t>(first.grid().height) * first.grid().width;
    NormStats out;
    for (int c = 0; c < c_count; ++c) {
        double sum = 0.0;
        for (const auto& f : fields) {
            const double* p = f.data().data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        const double n = static_cast<double>(plane * fields.size());
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& f : fields) {
            const double* p = f.data().data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = p[i] - mean;
                ss += d * d;
            }
        }
        double std_dev = std::sqrt(ss / n);
        if (!(std_dev > 0.0)) std_dev = 1.0;  // constant channel: center only
        out.set(first.channels()[c], {mean, std_dev});
    }
    return out;
}

namespace {

StateTensor apply_affine(const StateTensor& state, const NormStats& stats, bool forward) {
    const std::size_t plane =
        static_cast<std::size_t>(state.grid().height) * state.grid().width;
    std::vector<double> data(state.data().begin(), state.data().end());
    for (int c = 0; c < state.channel_count(); ++c) {
        const ChannelStats* cs = stats.find(state.channels()[c]);
        if (cs == nullptr) {
            throw std::invalid_argument("normalization stats missing channel: " +
                                        state.channels()[c]);
        }
        double* p = data.data() + c * plane;
        if (forward) {
            const double inv = 1.0 / cs->std;
            for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - cs->mean) * inv;
        } else {
            for (std::size_t i = 0; i < plane; ++i) p[i] = p[i] * cs->std + cs->mean;
        }
    }
    return StateTensor(state.grid(), state.channels(), std::move(data));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

bool get_u16(std::istream& is, std::uint16_t& v) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) return false;
    v = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    return true;
}

constexpr char kMagic[4] = {'F', 'L', 'D', '1'};

}  // namespace

StateTensor normalize(const StateTensor& state, const NormStats& stats) {
    return apply_affine(state, stats, true);
}

StateTensor denormalize(const StateTensor& state, const NormStats& stats) {
    return apply_affine(state, stats, false);
}

void save_field(const StateTensor& state, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os.write(kMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(state.channel_count()));
    put_u32(os, static_cast<std::uint32_t>(state.grid().height));
    put_u32(os, static_cast<std::uint32_t>(state.grid().width));
    for (const auto& name : state.channels()) {
        if (name.size() > 0xFFFF) throw std::invalid_argument("channel name too long: " + name);
        put_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    std::vector<unsigned char> payload(state.size() * 4);
    for (std::size_t i = 0; i < state.size(); ++i) {
        const float f = static_cast<float>(state.data()[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        payload[4 * i + 0] = static_cast<unsigned char>(bits);
        payload[4 * i + 1] = static_cast<unsigned char>(bits >> 8);
        payload[4 * i + 2] = static_cast<unsigned char>(bits >> 16);
        payload[4 * i + 3] = static_cast<unsigned char>(bits >> 24);
    }
    os.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size()));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

StateTensor load_field(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    char magic[4];
    if (!is.read(magic, 4)) throw TruncationError("file too short for magic: " + path.string());
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad magic bytes in " + path.string());
    }
    std::uint32_t c = 0, h = 0, w = 0;
    if (!get_u32(is, c) || !get_u32(is, h) || !get_u32(is, w)) {
        throw TruncationError("header truncated in " + path.string());
    }
    if (c == 0 || h < 4 || w < 4) {
        throw DimensionError("unusable dimensions " + std::to_string(c) + "x" +
                             std::to_string(h) + "x" + std::to_string(w) + " in " +
                             path.string());
    }
    std::vector<std::string> channels(c);
    for (auto& name : channels) {
        std::uint16_t len = 0;
        if (!get_u16(is, len)) throw TruncationError("channel table truncated: " + path.string());
        name.resize(len);
        if (len > 0 && !is.read(name.data(), len)) {
            throw TruncationError("channel name truncated: " + path.string());
        }
    }
    const std::size_t count = static_cast<std::size_t>(c) * h * w;
    std::vector<unsigned char> payload(count * 4);
    if (!is.read(reinterpret_cast<char*>(payload.data()),
                 static_cast<std::streamsize>(payload.size()))) {
        throw TruncationError("payload truncated: expected " + std::to_string(count) +
                              " float32 values in " + path.string());
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        data[i] = static_cast<double>(f);
    }
    Grid grid{static_cast<int>(h), static_cast<int>(w), true};
    return StateTensor(grid, std::move(channels), std::move(data));
}

StateTensor zeros_like(const StateTensor& ref) {
    return StateTensor(ref.grid(), ref.channels());
}

void add_scaled(StateTensor& dst, const StateTensor& src, double scale) {
    if (!dst.same_shape(src)) throw DimensionError("add_scaled: shape mismatch");
    double* d = dst.data().data();
    const double* s = src.data().data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += scale * s[i];
}

StateTensor lin_comb(const StateTensor& a, double ca, const StateTensor& b, double cb) {
    if (!a.same_shape(b)) throw DimensionError("lin_comb: shape mismatch");
    std::vector<double> data(a.size());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = ca * pa[i] + cb * pb[i];
    return StateTensor(a.grid(), a.channels(), std::move(data));
}

double dot(const StateTensor& a, const StateTensor& b) {
    if (!a.same_shape(b)) throw DimensionError("dot: shape mismatch");
    double acc = 0.0;
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < a.size(); ++i) acc += pa[i] * pb[i];
    return acc;
}

double l2_norm(const StateTensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace scorefuse
