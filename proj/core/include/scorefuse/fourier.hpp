#pragma once

#include <complex>
#include <span>
#include <vector>

namespace scorefuse {

/// Plain DFT helpers for desk-scale grids. Sizes here are tens of samples, so
/// the O(n^2) transform is simpler than carrying an FFT dependency.
void dft_1d(std::span<const std::complex<double>> in, std::span<std::complex<double>> out,
            bool inverse);

/// Forward 2-D DFT of a real H x W field (row-major), unnormalized.
std::vector<std::complex<double>> dft_2d(std::span<const double> field, int height, int width);

/// Signed wavenumber of DFT bin k on an n-sample axis.
inline int signed_wavenumber(int k, int n) { return (k <= n / 2) ? k : k - n; }

}  // namespace scorefuse
