#pragma once

#include "scorefuse/fields.hpp"

namespace scorefuse {

/// Catmull-Rom cubic convolution kernel (a = -0.5). Reproduces cubic
/// polynomials on uniform samples and interpolates exactly at knots.
double catmull_rom(double t);

/// Four-tap 1-D stencil with boundary handling already folded into the
/// resolved indices (duplicates appear under clamping).
struct CubicStencil {
    int idx[4];
    double w[4];
};

/// Stencil for a query at continuous grid position `pos` (in units of source
/// samples) on an n-sample periodic axis.
CubicStencil cubic_stencil_periodic(double pos, int n);

/// Same on a clamped axis: taps outside [0, n-1] are clamped to the edge.
CubicStencil cubic_stencil_clamped(double pos, int n);

/// Position of normalized coordinate u on an axis with n node-registered
/// samples: periodic axes place node j at u = j/n, clamped axes at u = j/(n-1).
inline double node_position_periodic(double u, int n) { return u * n; }
inline double node_position_clamped(double u, int n) { return u * (n - 1); }

/// Cell-centered registration (sample j lives at u = (j + 0.5)/n), used when
/// the source grid is a coarse field produced by cell-centered resampling.
inline double cell_position(double u, int n) { return u * n - 0.5; }

/// Bicubic upsampling of a coarse field (cell-centered samples) back onto a
/// fine grid (node-registered), wrap in x and clamp in y. This is the
/// classical interpolation baseline the guided sampler is compared against.
StateTensor bicubic_upsample(const StateTensor& coarse, const Grid& fine_grid);

}  // namespace scorefuse
