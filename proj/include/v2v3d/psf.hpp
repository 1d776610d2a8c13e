#pragma once

#include <utility>
#include <vector>

#include "v2v3d/config.hpp"
#include "v2v3d/types.hpp"

namespace v2v3d {

// Parametric stand-in for measured light-field PSFs: per view, a Gaussian
// whose center drifts linearly with depth (parallax) and whose width grows
// with defocus.
struct PsfConfig {
    int nu = 13;                // view count; view 0 axial, the rest on a ring
    int k = 9;                  // odd kernel side length in pixels
    int nz = 8;                 // depth count
    double z_focal = 3.5;       // focal depth index, in voxel units
    double ring_radius_tan = 0.5; // tangent of the ring illumination angle
    double shift_scale = 1.0;   // pixels of lateral shift per unit tan * depth step
    double sigma0 = 1.0;        // in-focus Gaussian std, pixels
    double sigma_slope = 0.15;  // std growth per depth step of defocus

    void validate() const;
};

PsfConfig psf_config_from(const Config& cfg);

// Tangent-space direction of view u under the ring geometry.
std::pair<double, double> view_direction(const PsfConfig& cfg, int u);

// Build the full stack; every (u, z) slice is normalized to unit sum and the
// result is flagged `normalized`. Throws GeometryError if a slice center
// lands more than (k-1)/2 pixels outside the kernel support.
PsfStack synthesize_psf(const PsfConfig& cfg);

// out(u, kx, ky, z) = in(u, k-1-kx, k-1-ky, z).
PsfStack flip_psf(const PsfStack& p);

// Intensity centroid of each (u, z) slice, rounded to the nearest integer
// offset from the kernel center with ties toward the center. Throws
// DataError on a zero-sum slice.
AlignKernelStack extract_centroid_kernels(const PsfStack& p);

} // namespace v2v3d
