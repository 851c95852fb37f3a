#include "scorefuse/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "scorefuse/fourier.hpp"
#include "scorefuse/rng.hpp"

namespace scorefuse {

double rmse(const StateTensor& a, const StateTensor& b) {
    if (!a.same_shape(b)) throw DimensionError("rmse: shape mismatch");
    double ss = 0.0;
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = pa[i] - pb[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(a.size()));
}

double rmse(const StateTensor& a, const StateTensor& b, std::string_view channel) {
    if (!a.same_shape(b)) throw DimensionError("rmse: shape mismatch");
    const int c = a.channel_index(channel);
    if (c < 0) throw std::invalid_argument("rmse: channel not present: " + std::string(channel));
    const std::size_t plane = static_cast<std::size_t>(a.grid().height) * a.grid().width;
    double ss = 0.0;
    const double* pa = a.data().data() + c * plane;
    const double* pb = b.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
        const double d = pa[i] - pb[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(plane));
}

SpectrumSeries angle_averaged_spectrum(const StateTensor& state) {
    const Grid& g = state.grid();
    validate_grid(g);
    SpectrumSeries out;
    out.channels = state.channels();
    out.k_max = std::min(g.height, g.width) / 2;
    const int bins = out.k_max + 1;
    const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
    const double norm = 1.0 / static_cast<double>(plane);
    for (int c = 0; c < state.channel_count(); ++c) {
        std::vector<double> sum(bins, 0.0);
        std::vector<std::size_t> count(bins, 0);
        const auto spec = dft_2d(state.data().subspan(c * plane, plane), g.height, g.width);
        for (int ky = 0; ky < g.height; ++ky) {
            const int sy = signed_wavenumber(ky, g.height);
            for (int kx = 0; kx < g.width; ++kx) {
                const int sx = signed_wavenumber(kx, g.width);
                const double radius = std::sqrt(static_cast<double>(sy) * sy +
                                                static_cast<double>(sx) * sx);
                int bin = static_cast<int>(std::floor(radius + 0.5));
                bin = std::min(bin, out.k_max);
                sum[bin] += std::norm(spec[ky * g.width + kx]) * norm;
                count[bin] += 1;
            }
        }
        std::vector<double> mean(bins, 0.0);
        for (int k = 0; k < bins; ++k) {
            mean[k] = (count[k] > 0) ? sum[k] / static_cast<double>(count[k]) : 0.0;
        }
        out.energy.push_back(std::move(mean));
        out.counts.push_back(std::move(count));
    }
    return out;
}

double high_wavenumber_deficit(const SpectrumSeries& reference, const SpectrumSeries& candidate,
                               int k_cut) {
    if (reference.k_max != candidate.k_max || reference.channels != candidate.channels) {
        throw std::invalid_argument("high_wavenumber_deficit: spectra disagree on layout");
    }
    double deficit = 0.0;
    for (std::size_t c = 0; c < reference.energy.size(); ++c) {
        for (int k = k_cut + 1; k <= reference.k_max; ++k) {
            const double gap = reference.energy[c][k] - candidate.energy[c][k];
            if (gap > 0.0) deficit += gap * static_cast<double>(reference.counts[c][k]);
        }
    }
    return deficit;
}

ScatterSet extract_scatter(const StateTensor& reference, const StateTensor& reconstructed,
                           const PointSet& points, const std::vector<bool>& coverage_mask,
                           int per_stratum, std::uint64_t seed) {
    if (!reference.same_shape(reconstructed)) {
        throw DimensionError("extract_scatter: shape mismatch");
    }
    const Grid& g = reference.grid();
    if (coverage_mask.size() != static_cast<std::size_t>(g.height) * g.width) {
        throw DimensionError("extract_scatter: coverage mask size mismatch");
    }
    ScatterSet out;
    if (!points.empty()) {
        const ObsVector ref_obs = sample_points(reference, points);
        const ObsVector rec_obs = sample_points(reconstructed, points);
        for (std::size_t i = 0; i < points.size(); ++i) {
            out.pairs.push_back({points[i].channel, ref_obs.values[i], rec_obs.values[i], true});
        }
    }
    // stratified sample of uncovered nodes: 4x4 blocks, per_stratum nodes each
    CounterRng rng(seed);
    const int by = std::max(1, g.height / 4);
    const int bx = std::max(1, g.width / 4);
    for (int sy = 0; sy < g.height; sy += by) {
        for (int sx = 0; sx < g.width; sx += bx) {
            std::vector<std::pair<int, int>> candidates;
            for (int y = sy; y < std::min(sy + by, g.height); ++y) {
                for (int x = sx; x < std::min(sx + bx, g.width); ++x) {
                    if (!coverage_mask[static_cast<std::size_t>(y) * g.width + x]) {
                        candidates.emplace_back(y, x);
                    }
                }
            }
            const int take = std::min<int>(per_stratum, static_cast<int>(candidates.size()));
            for (int i = 0; i < take; ++i) {
                const std::size_t pick =
                    i + static_cast<std::size_t>(rng.uniform() * (candidates.size() - i));
                std::swap(candidates[i], candidates[pick]);
                const auto [y, x] = candidates[i];
                for (int c = 0; c < reference.channel_count(); ++c) {
                    out.pairs.push_back({reference.channels()[c], reference(c, y, x),
                                         reconstructed(c, y, x), false});
                }
            }
        }
    }
    return out;
}

std::vector<std::vector<double>> line_trace(const StateTensor& state, int y_row) {
    const Grid& g = state.grid();
    if (y_row < 0 || y_row >= g.height) {
        throw std::out_of_range("line_trace: row " + std::to_string(y_row) +
                                " outside grid height " + std::to_string(g.height));
    }
    std::vector<std::vector<double>> out(state.channel_count());
    for (int c = 0; c < state.channel_count(); ++c) {
        out[c].resize(g.width);
        for (int x = 0; x < g.width; ++x) out[c][x] = state(c, y_row, x);
    }
    return out;
}

void write_spectrum_csv(const SpectrumSeries& spectrum, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "k,channel,energy\n";
    os.precision(17);
    for (std::size_t c = 0; c < spectrum.channels.size(); ++c) {
        for (int k = 0; k <= spectrum.k_max; ++k) {
            os << k << ',' << spectrum.channels[c] << ',' << spectrum.energy[c][k] << '\n';
        }
    }
}

void write_scatter_csv(const ScatterSet& scatter, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "tag,channel,reference,reconstructed\n";
    os.precision(17);
    for (const ScatterPair& p : scatter.pairs) {
        os << (p.observed ? "observed" : "unobserved") << ',' << p.channel << ',' << p.reference
           << ',' << p.reconstructed << '\n';
    }
}

void write_trace_csv(const StateTensor& state, int y_row, const std::filesystem::path& path) {
    const auto traces = line_trace(state, y_row);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << "x,channel,value\n";
    os.precision(17);
    for (int c = 0; c < state.channel_count(); ++c) {
        for (std::size_t x = 0; x < traces[c].size(); ++x) {
            os << x << ',' << state.channels()[c] << ',' << traces[c][x] << '\n';
        }
    }
}

}  // namespace scorefuse
