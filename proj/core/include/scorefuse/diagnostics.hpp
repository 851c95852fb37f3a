#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scorefuse/fields.hpp"
#include "scorefuse/measure.hpp"

namespace scorefuse {

double rmse(const StateTensor& a, const StateTensor& b);
double rmse(const StateTensor& a, const StateTensor& b, std::string_view channel);

/// Angle-averaged spectral energy: per channel, squared DFT magnitudes
/// (normalized so the bins sum to the field's total squared magnitude) binned
/// by integer radius round(sqrt(kx^2 + ky^2)). Radii beyond the isotropic
/// cutoff floor(min(H, W)/2) fold into the last bin so the partition stays
/// complete.
struct SpectrumSeries {
    std::vector<std::string> channels;
    int k_max = 0;
    std::vector<std::vector<double>> energy;        // [channel][k], bin means
    std::vector<std::vector<std::size_t>> counts;   // modes per bin
};

SpectrumSeries angle_averaged_spectrum(const StateTensor& state);

/// Total bin-mean energy above wavenumber k_cut missing relative to a
/// reference spectrum (per-bin shortfalls clamped at zero, weighted by bin
/// population). Used to compare fine-scale recovery between methods.
double high_wavenumber_deficit(const SpectrumSeries& reference, const SpectrumSeries& candidate,
                               int k_cut);

struct ScatterPair {
    std::string channel;
    double reference = 0.0;
    double reconstructed = 0.0;
    bool observed = false;
};

struct ScatterSet {
    std::vector<ScatterPair> pairs;
};

/// Pairs (reference, reconstructed) at the query points (tagged observed) and
/// at a stratified sample of grid nodes outside the coverage mask (tagged
/// unobserved). `per_stratum` nodes are drawn from each block of a 4x4
/// partition of the grid.
ScatterSet extract_scatter(const StateTensor& reference, const StateTensor& reconstructed,
                           const PointSet& points, const std::vector<bool>& coverage_mask,
                           int per_stratum = 8, std::uint64_t seed = 0);

/// Values of one grid row in x order, one series per channel.
std::vector<std::vector<double>> line_trace(const StateTensor& state, int y_row);

/// CSV emitters with one-line headers: spectra as `k,channel,energy`,
/// scatters as `tag,channel,reference,reconstructed`.
void write_spectrum_csv(const SpectrumSeries& spectrum, const std::filesystem::path& path);
void write_scatter_csv(const ScatterSet& scatter, const std::filesystem::path& path);
void write_trace_csv(const StateTensor& state, int y_row, const std::filesystem::path& path);

}  // namespace scorefuse
