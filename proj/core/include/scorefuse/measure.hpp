#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scorefuse/fields.hpp"
#include "scorefuse/rng.hpp"

namespace scorefuse {

/// Links one scalar observation to its channel and normalized location.
struct ObsEntry {
    std::string channel;
    double x_norm = 0.0;
    double y_norm = 0.0;
};

/// One measurement modality's worth of scalar observations.
struct ObsVector {
    std::vector<double> values;
    std::vector<ObsEntry> layout;
};

/// Query coordinates in normalized space: x_norm in [0,1) wraps, y_norm in
/// [0,1] clamps. Duplicates are permitted.
struct PointQuery {
    std::string channel;
    double x_norm = 0.0;
    double y_norm = 0.0;
};
using PointSet = std::vector<PointQuery>;

/// Linear map from a full-resolution state to observation space, with the
/// exact transposed action. Operators bind to a grid/channel layout at
/// construction and precompute their sparse stencils, so apply and vjp are
/// pure and cheap.
class MeasurementOp {
public:
    virtual ~MeasurementOp() = default;
    virtual ObsVector apply(const StateTensor& state) const = 0;
    virtual StateTensor vjp(const StateTensor& state, std::span<const double> cotangent) const = 0;
    virtual std::size_t output_size() const = 0;
    virtual const Grid& input_grid() const = 0;
    virtual const std::vector<std::string>& input_channels() const = 0;
};

/// Bicubic resampling of every channel onto an (H/fy) x (W/fx) grid, samples
/// cell-centered in normalized coordinates, wrap in x and clamp in y.
class CoarsenOp final : public MeasurementOp {
public:
    CoarsenOp(Grid grid, std::vector<std::string> channels, int factor_y, int factor_x);

    ObsVector apply(const StateTensor& state) const override;
    StateTensor vjp(const StateTensor& state, std::span<const double> cotangent) const override;
    std::size_t output_size() const override;
    const Grid& input_grid() const override { return grid_; }
    const std::vector<std::string>& input_channels() const override { return channels_; }

    Grid coarse_grid() const { return coarse_; }
    /// Reshape of apply() output as a StateTensor on the coarse grid.
    StateTensor apply_as_state(const StateTensor& state) const;

private:
    Grid grid_;
    Grid coarse_;
    std::vector<std::string> channels_;
    struct Tap {
        std::uint32_t index;
        double weight;
    };
    std::vector<Tap> taps_;           // concatenated per-output stencils
    std::vector<std::uint32_t> row_;  // prefix offsets into taps_, size out+1
    std::vector<ObsEntry> layout_;
};

/// Bicubic evaluation of named channels at arbitrary normalized coordinates.
class PointSamplingOp final : public MeasurementOp {
public:
    PointSamplingOp(Grid grid, std::vector<std::string> channels, const PointSet& points);

    ObsVector apply(const StateTensor& state) const override;
    StateTensor vjp(const StateTensor& state, std::span<const double> cotangent) const override;
    std::size_t output_size() const override;
    const Grid& input_grid() const override { return grid_; }
    const std::vector<std::string>& input_channels() const override { return channels_; }

private:
    Grid grid_;
    std::vector<std::string> channels_;
    struct Tap {
        std::uint32_t index;
        double weight;
    };
    std::vector<Tap> taps_;
    std::vector<std::uint32_t> row_;
    std::vector<ObsEntry> layout_;
};

/// One-shot coarsening without keeping the operator around.
ObsVector coarsen(const StateTensor& state, int factor_y, int factor_x);
/// One-shot point sampling.
ObsVector sample_points(const StateTensor& state, const PointSet& points);
/// Transposed-Jacobian action of any measurement operator.
StateTensor op_vjp(const MeasurementOp& op, const StateTensor& state,
                   std::span<const double> cotangent);

/// Flattens a coarse state into the value ordering CoarsenOp::apply produces
/// (channel-major, row-major), for use as the `y` of an emulator guidance term.
std::vector<double> flatten_observation(const StateTensor& coarse);

/// One row of a point-observation file.
struct PointObs {
    long time = 0;
    PointQuery query;
    double value = 0.0;
    double sigma_y = 0.0;
};

/// Text format: header `time,channel,x_norm,y_norm,value,sigma_y`, one row per
/// scalar observation, UTF-8, `time` an integer step index.
void save_point_obs(std::span<const PointObs> obs, const std::filesystem::path& path);
std::vector<PointObs> load_point_obs(const std::filesystem::path& path);

/// Clustered query locations mimicking land-only sensor geometry: points are
/// concentrated in contiguous blobs rather than spread uniformly.
PointSet make_clustered_points(std::span<const std::string> channels, int clusters,
                               int points_per_cluster, double spread, CounterRng& rng);

/// Grid-node mask marking nodes within `radius` grid cells of any query point
/// (x measured with wraparound). Used to separate observed from unobserved
/// locations in diagnostics.
std::vector<bool> points_coverage_mask(const Grid& grid, const PointSet& points, double radius);

}  // namespace scorefuse
