#include "scorefuse/measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scorefuse/interp.hpp"

namespace scorefuse {

namespace {

// Accumulates the 16 bicubic taps for one (channel, y_norm, x_norm) query
// into a tap list, merging duplicate indices produced by clamping.
template <typename TapT>
void push_bicubic_taps(std::vector<TapT>& taps, std::vector<std::uint32_t>& row,
                       const Grid& grid, int channel, double x_norm, double y_norm) {
    const CubicStencil sy =
        cubic_stencil_clamped(node_position_clamped(y_norm, grid.height), grid.height);
    const CubicStencil sx =
        cubic_stencil_periodic(node_position_periodic(x_norm, grid.width), grid.width);
    const std::size_t begin = taps.size();
    const std::size_t plane = static_cast<std::size_t>(grid.height) * grid.width;
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
            const double w = sy.w[j] * sx.w[i];
            if (w == 0.0) continue;
            const std::uint32_t flat = static_cast<std::uint32_t>(
                channel * plane + static_cast<std::size_t>(sy.idx[j]) * grid.width + sx.idx[i]);
            bool merged = false;
            for (std::size_t k = begin; k < taps.size(); ++k) {
                if (taps[k].index == flat) {
                    taps[k].weight += w;
                    merged = true;
                    break;
                }
            }
            if (!merged) taps.push_back({flat, w});
        }
    }
    row.push_back(static_cast<std::uint32_t>(taps.size()));
}

template <typename TapT>
std::vector<double> sparse_apply(const std::vector<TapT>& taps,
                                 const std::vector<std::uint32_t>& row,
                                 std::span<const double> x) {
    std::vector<double> out(row.size() - 1);
    for (std::size_t r = 0; r + 1 < row.size(); ++r) {
        double acc = 0.0;
        for (std::uint32_t k = row[r]; k < row[r + 1]; ++k) {
            acc += taps[k].weight * x[taps[k].index];
        }
        out[r] = acc;
    }
    return out;
}

template <typename TapT>
void sparse_vjp(const std::vector<TapT>& taps, const std::vector<std::uint32_t>& row,
                std::span<const double> cotangent, std::span<double> out) {
    for (std::size_t r = 0; r + 1 < row.size(); ++r) {
        const double c = cotangent[r];
        if (c == 0.0) continue;
        for (std::uint32_t k = row[r]; k < row[r + 1]; ++k) {
            out[taps[k].index] += taps[k].weight * c;
        }
    }
}

void check_state(const MeasurementOp& op, const StateTensor& state) {
    if (state.grid() != op.input_grid() || state.channels() != op.input_channels()) {
        throw DimensionError("measurement operator bound to a different grid/channel layout");
    }
}

}  // namespace

CoarsenOp::CoarsenOp(Grid grid, std::vector<std::string> channels, int factor_y, int factor_x)
    : grid_(grid), channels_(std::move(channels)) {
    validate_grid(grid_);
    if (factor_y < 2 || factor_x < 2) {
        throw std::invalid_argument("coarsening factors must be >= 2");
    }
    if (grid_.height % factor_y != 0 || grid_.width % factor_x != 0) {
        throw std::invalid_argument("coarsening factors must divide the grid dimensions (" +
                                    std::to_string(grid_.height) + "x" +
                                    std::to_string(grid_.width) + " vs factors " +
                                    std::to_string(factor_y) + "," + std::to_string(factor_x) +
                                    ")");
    }
    coarse_ = Grid{grid_.height / factor_y, grid_.width / factor_x, grid_.x_periodic};
    row_.push_back(0);
    for (int c = 0; c < static_cast<int>(channels_.size()); ++c) {
        for (int cy = 0; cy < coarse_.height; ++cy) {
            const double y_norm = (cy + 0.5) / coarse_.height;
            for (int cx = 0; cx < coarse_.width; ++cx) {
                const double x_norm = (cx + 0.5) / coarse_.width;
                push_bicubic_taps(taps_, row_, grid_, c, x_norm, y_norm);
                layout_.push_back({channels_[c], x_norm, y_norm});
            }
        }
    }
}

ObsVector CoarsenOp::apply(const StateTensor& state) const {
    check_state(*this, state);
    return {sparse_apply(taps_, row_, state.data()), layout_};
}

StateTensor CoarsenOp::vjp(const StateTensor& state, std::span<const double> cotangent) const {
    check_state(*this, state);
    if (cotangent.size() != output_size()) {
        throw DimensionError("cotangent length " + std::to_string(cotangent.size()) +
                             " does not match operator output " + std::to_string(output_size()));
    }
    StateTensor out(grid_, channels_);
    sparse_vjp(taps_, row_, cotangent, out.data());
    return out;
}

std::size_t CoarsenOp::output_size() const { return row_.size() - 1; }

StateTensor CoarsenOp::apply_as_state(const StateTensor& state) const {
    ObsVector obs = apply(state);
    return StateTensor(coarse_, channels_, std::move(obs.values));
}

PointSamplingOp::PointSamplingOp(Grid grid, std::vector<std::string> channels,
                                 const PointSet& points)
    : grid_(grid), channels_(std::move(channels)) {
    validate_grid(grid_);
    if (points.empty()) throw std::invalid_argument("point set must be nonempty");
    row_.push_back(0);
    for (const PointQuery& q : points) {
        int c = -1;
        for (std::size_t i = 0; i < channels_.size(); ++i) {
            if (channels_[i] == q.channel) {
                c = static_cast<int>(i);
                break;
            }
        }
        if (c < 0) throw std::invalid_argument("channel not in state: " + q.channel);
        if (!(q.x_norm >= 0.0 && q.x_norm < 1.0) || !(q.y_norm >= 0.0 && q.y_norm <= 1.0)) {
            throw std::invalid_argument("point out of normalized bounds: (" +
                                        std::to_string(q.x_norm) + ", " +
                                        std::to_string(q.y_norm) + ")");
        }
        push_bicubic_taps(taps_, row_, grid_, c, q.x_norm, q.y_norm);
        layout_.push_back({q.channel, q.x_norm, q.y_norm});
    }
}

ObsVector PointSamplingOp::apply(const StateTensor& state) const {
    check_state(*this, state);
    return {sparse_apply(taps_, row_, state.data()), layout_};
}

StateTensor PointSamplingOp::vjp(const StateTensor& state,
                                 std::span<const double> cotangent) const {
    check_state(*this, state);
    if (cotangent.size() != output_size()) {
        throw DimensionError("cotangent length " + std::to_string(cotangent.size()) +
                             " does not match operator output " + std::to_string(output_size()));
    }
    StateTensor out(grid_, channels_);
    sparse_vjp(taps_, row_, cotangent, out.data());
    return out;
}

std::size_t PointSamplingOp::output_size() const { return row_.size() - 1; }

ObsVector coarsen(const StateTensor& state, int factor_y, int factor_x) {
    return CoarsenOp(state.grid(), state.channels(), factor_y, factor_x).apply(state);
}

ObsVector sample_points(const StateTensor& state, const PointSet& points) {
    return PointSamplingOp(state.grid(), state.channels(), points).apply(state);
}

StateTensor op_vjp(const MeasurementOp& op, const StateTensor& state,
                   std::span<const double> cotangent) {
    return op.vjp(state, cotangent);
}

std::vector<double> flatten_observation(const StateTensor& coarse) {
    return {coarse.data().begin(), coarse.data().end()};
}

void save_point_obs(std::span<const PointObs> obs, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "time,channel,x_norm,y_norm,value,sigma_y\n";
    os.precision(17);
    for (const PointObs& o : obs) {
        os << o.time << ',' << o.query.channel << ',' << o.query.x_norm << ',' << o.query.y_norm
           << ',' << o.value << ',' << o.sigma_y << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<PointObs> load_point_obs(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty point-observation file: " + path.string());
    if (line != "time,channel,x_norm,y_norm,value,sigma_y") {
        throw FormatError("unexpected header in " + path.string() + ": " + line);
    }
    std::vector<PointObs> out;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        PointObs o;
        try {
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing time");
            o.time = std::stol(field);
            if (!std::getline(ss, o.query.channel, ',')) {
                throw std::invalid_argument("missing channel");
            }
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing x_norm");
            o.query.x_norm = std::stod(field);
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing y_norm");
            o.query.y_norm = std::stod(field);
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing value");
            o.value = std::stod(field);
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing sigma_y");
            o.sigma_y = std::stod(field);
        } catch (const std::exception& e) {
            throw FormatError("bad row " + std::to_string(line_no) + " in " + path.string() +
                              ": " + e.what());
        }
        out.push_back(std::move(o));
    }
    return out;
}

PointSet make_clustered_points(std::span<const std::string> channels, int clusters,
                               int points_per_cluster, double spread, CounterRng& rng) {
    if (clusters < 1 || points_per_cluster < 1) {
        throw std::invalid_argument("need at least one cluster and one point per cluster");
    }
    PointSet pts;
    pts.reserve(static_cast<std::size_t>(clusters) * points_per_cluster * channels.size());
    for (int k = 0; k < clusters; ++k) {
        const double cx = rng.uniform();
        const double cy = 0.1 + 0.8 * rng.uniform();  // keep blob centers off the clamped edges
        for (int p = 0; p < points_per_cluster; ++p) {
            double x = cx + spread * rng.normal();
            double y = cy + spread * rng.normal();
            x -= std::floor(x);  // wrap
            y = std::clamp(y, 0.0, 1.0);
            if (x >= 1.0) x = 0.0;
            for (const std::string& ch : channels) {
                pts.push_back({ch, x, y});
            }
        }
    }
    return pts;
}

std::vector<bool> points_coverage_mask(const Grid& grid, const PointSet& points, double radius) {
    std::vector<bool> mask(static_cast<std::size_t>(grid.height) * grid.width, false);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            for (const PointQuery& q : points) {
                const double px = q.x_norm * grid.width;
                const double py = q.y_norm * (grid.height - 1);
                double dx = std::abs(px - x);
                dx = std::min(dx, grid.width - dx);
                const double dy = py - y;
                if (dx * dx + dy * dy <= radius * radius) {
                    mask[static_cast<std::size_t>(y) * grid.width + x] = true;
                    break;
                }
            }
        }
    }
    return mask;
}

}  // namespace scorefuse
