#include "scorefuse/fourier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace scorefuse {

void dft_1d(std::span<const std::complex<double>> in, std::span<std::complex<double>> out,
            bool inverse) {
    const std::size_t n = in.size();
    if (out.size() != n) throw std::invalid_argument("dft_1d: size mismatch");
    const double sign = inverse ? 1.0 : -1.0;
    const double scale = inverse ? 1.0 / static_cast<double>(n) : 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            const double angle =
                sign * 2.0 * std::numbers::pi * static_cast<double>(k * j % n) / n;
            acc += in[j] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc * scale;
    }
}

std::vector<std::complex<double>> dft_2d(std::span<const double> field, int height, int width) {
    if (field.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("dft_2d: field size mismatch");
    }
    std::vector<std::complex<double>> rows(field.size());
    std::vector<std::complex<double>> line(width);
    std::vector<std::complex<double>> line_out(width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) line[x] = {field[y * width + x], 0.0};
        dft_1d(line, line_out, false);
        for (int x = 0; x < width; ++x) rows[y * width + x] = line_out[x];
    }
    std::vector<std::complex<double>> out(field.size());
    std::vector<std::complex<double>> col(height);
    std::vector<std::complex<double>> col_out(height);
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) col[y] = rows[y * width + x];
        dft_1d(col, col_out, false);
        for (int y = 0; y < height; ++y) out[y * width + x] = col_out[y];
    }
    return out;
}

}  // namespace scorefuse
