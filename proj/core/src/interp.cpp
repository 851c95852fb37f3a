#include "scorefuse/interp.hpp"

#include <algorithm>
#include <cmath>

namespace scorefuse {

double catmull_rom(double t) {
    const double a = -0.5;
    const double x = std::abs(t);
    if (x <= 1.0) {
        return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    }
    if (x < 2.0) {
        return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    }
    return 0.0;
}

namespace {

inline int wrap_index(int i, int n) {
    int m = i % n;
    if (m < 0) m += n;
    return m;
}

CubicStencil raw_stencil(double pos) {
    CubicStencil s{};
    const double base = std::floor(pos);
    const double t = pos - base;
    const int b = static_cast<int>(base);
    for (int k = 0; k < 4; ++k) {
        s.idx[k] = b - 1 + k;
        s.w[k] = catmull_rom(t - static_cast<double>(k - 1));
    }
    return s;
}

}  // namespace

CubicStencil cubic_stencil_periodic(double pos, int n) {
    CubicStencil s = raw_stencil(pos);
    for (int k = 0; k < 4; ++k) s.idx[k] = wrap_index(s.idx[k], n);
    return s;
}

CubicStencil cubic_stencil_clamped(double pos, int n) {
    CubicStencil s = raw_stencil(pos);
    for (int k = 0; k < 4; ++k) s.idx[k] = std::clamp(s.idx[k], 0, n - 1);
    return s;
}

StateTensor bicubic_upsample(const StateTensor& coarse, const Grid& fine_grid) {
    validate_grid(fine_grid);
    const Grid& cg = coarse.grid();
    StateTensor out(fine_grid, coarse.channels());
    for (int c = 0; c < coarse.channel_count(); ++c) {
        for (int fy = 0; fy < fine_grid.height; ++fy) {
            const double y_norm = static_cast<double>(fy) / (fine_grid.height - 1);
            const CubicStencil sy = cubic_stencil_clamped(cell_position(y_norm, cg.height),
                                                          cg.height);
            for (int fx = 0; fx < fine_grid.width; ++fx) {
                const double x_norm = static_cast<double>(fx) / fine_grid.width;
                const CubicStencil sx = cubic_stencil_periodic(cell_position(x_norm, cg.width),
                                                               cg.width);
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    for (int i = 0; i < 4; ++i) {
                        acc += sy.w[j] * sx.w[i] * coarse(c, sy.idx[j], sx.idx[i]);
                    }
                }
                out.at(c, fy, fx) = acc;
            }
        }
    }
    return out;
}

}  // namespace scorefuse
