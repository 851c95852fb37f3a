#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scorefuse {

/// Raised on malformed field files (unrecognized magic or garbled header).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a field file declares more payload than it contains.
struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when declared dimensions are unusable (too small, zero channels,
/// or inconsistent with the caller's expectation).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rectangular grid, periodic in x (longitude-like), clamped in y.
/// Minimum extent 4 so bicubic stencils always fit.
struct Grid {
    int height = 0;
    int width = 0;
    bool x_periodic = true;

    bool operator==(const Grid&) const = default;
};

void validate_grid(const Grid& grid);

/// Channels-by-grid tensor of real values. Data is stored channel-major,
/// row-major within a channel. Treated as an immutable value once built:
/// sharing const references across threads is safe, and all pipeline
/// operations return new tensors.
class StateTensor {
public:
    StateTensor() = default;
    StateTensor(Grid grid, std::vector<std::string> channels);
    StateTensor(Grid grid, std::vector<std::string> channels, std::vector<double> data);

    const Grid& grid() const { return grid_; }
    const std::vector<std::string>& channels() const { return channels_; }
    int channel_count() const { return static_cast<int>(channels_.size()); }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * grid_.height + y) * grid_.width + x;
    }
    double operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }
    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    /// Index of a named channel, or -1 when absent.
    int channel_index(std::string_view name) const;

    bool same_shape(const StateTensor& other) const {
        return grid_ == other.grid_ && channels_ == other.channels_;
    }

    bool all_finite() const;

private:
    Grid grid_;
    std::vector<std::string> channels_;
    std::vector<double> data_;
};

/// Per-channel first and second moments in native units; std must be positive.
struct ChannelStats {
    double mean = 0.0;
    double std = 1.0;
};

class NormStats {
public:
    NormStats() = default;
    explicit NormStats(std::vector<std::string> channels, std::vector<ChannelStats> stats);

    const std::vector<std::string>& channels() const { return channels_; }
    const ChannelStats* find(std::string_view channel) const;

    void set(const std::string& channel, ChannelStats stats);

private:
    std::vector<std::string> channels_;
    std::vector<ChannelStats> stats_;
};

/// Two-pass per-channel moments over a set of fields sharing one layout.
NormStats compute_norm_stats(std::span<const StateTensor> fields);

/// Maps each channel through (value - mean) / std. Every channel of `state`
/// must be covered by `stats`.
StateTensor normalize(const StateTensor& state, const NormStats& stats);
/// Inverse of normalize.
StateTensor denormalize(const StateTensor& state, const NormStats& stats);

/// FLD1 container: magic "FLD1"; little-endian u32 C,H,W; C channel names as
/// (u16 length, UTF-8 bytes); then C*H*W little-endian float32, channel-major,
/// row-major within channel.
void save_field(const StateTensor& state, const std::filesystem::path& path);
StateTensor load_field(const std::filesystem::path& path);

// Elementwise helpers shared by the sampler and guidance paths. All require
// matching shapes.
StateTensor zeros_like(const StateTensor& ref);
void add_scaled(StateTensor& dst, const StateTensor& src, double scale);  // dst += scale*src
StateTensor lin_comb(const StateTensor& a, double ca, const StateTensor& b, double cb);
double dot(const StateTensor& a, const StateTensor& b);
double l2_norm(const StateTensor& a);

}  // namespace scorefuse
