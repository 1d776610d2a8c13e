#pragma once

#include <limits>

#include "v2v3d/types.hpp"

namespace v2v3d {

struct MetricReport {
    double psnr = 0.0;     // dB; +inf when MSE is exactly zero
    double ssim = 0.0;     // z-slice mean, in [-1, 1]
    double ssim_mip = 0.0; // same statistic on the z max-projections
    double bg_used = 0.0;

    // Cap used when rendering the +inf PSNR sentinel as text.
    static constexpr double kPsnrTextCap = 99.0;
};

// Background-subtraction protocol: max(0, v - bg), applied identically to
// reconstruction and ground truth before any metric.
Volume prepare(const Volume& v, double bg);

// 10*log10(peak^2 / MSE); peak is the prepared ground-truth max by
// convention. MSE == 0 returns +inf.
double psnr(const Volume& a, const Volume& b, double peak);

// Mean local SSIM per z slice, averaged over slices: K1=0.01, K2=0.03,
// 11x11 Gaussian window with sigma 1.5, valid windows only. `dynamic_range`
// plays the role of L in C1=(K1*L)^2, C2=(K2*L)^2.
double ssim(const Volume& a, const Volume& b, double dynamic_range);

// 2D SSIM on a single plane, same constants.
double ssim_plane(const float* a, const float* b, int nx, int ny, double dynamic_range);

// Max-projection over z of each volume, then plane SSIM.
double ssim_mip(const Volume& a, const Volume& b, double dynamic_range);

// Full protocol: subtract bg from both, take peak/range from the prepared
// ground truth, run PSNR and both SSIM variants.
MetricReport evaluate(const Volume& recon, const Volume& ground_truth, double bg);

} // namespace v2v3d
