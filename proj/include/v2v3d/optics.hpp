#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "v2v3d/parallel.hpp"
#include "v2v3d/types.hpp"

namespace v2v3d {

// Per-view multi-channel feature planes F(u, c, x, y); x fastest, then y,
// then channel, then view.
struct FeatureMapSet {
    int nu = 0, nc = 0, nx = 0, ny = 0;
    std::vector<float> data;

    FeatureMapSet() = default;
    FeatureMapSet(int nu_, int nc_, int nx_, int ny_, float fill = 0.0f)
        : nu(nu_), nc(nc_), nx(nx_), ny(ny_), data(static_cast<std::size_t>(nu_) * nc_ * nx_ * ny_, fill) {}

    std::size_t plane_pixels() const { return static_cast<std::size_t>(nx) * ny; }
    float* plane(int u, int c) { return data.data() + (static_cast<std::size_t>(u) * nc + c) * plane_pixels(); }
    const float* plane(int u, int c) const { return data.data() + (static_cast<std::size_t>(u) * nc + c) * plane_pixels(); }
};

// View-aggregated 3D feature grid A(z, c, x, y); x fastest, then y, then
// channel, then depth.
struct AlignedFeatures {
    int nz = 0, nc = 0, nx = 0, ny = 0;
    std::vector<float> data;

    AlignedFeatures() = default;
    AlignedFeatures(int nz_, int nc_, int nx_, int ny_, float fill = 0.0f)
        : nz(nz_), nc(nc_), nx(nx_), ny(ny_), data(static_cast<std::size_t>(nz_) * nc_ * nx_ * ny_, fill) {}

    std::size_t plane_pixels() const { return static_cast<std::size_t>(nx) * ny; }
    float* plane(int z, int c) { return data.data() + (static_cast<std::size_t>(z) * nc + c) * plane_pixels(); }
    const float* plane(int z, int c) const { return data.data() + (static_cast<std::size_t>(z) * nc + c) * plane_pixels(); }
};

enum class Aggregate { Mean };

// ---------------------------------------------------------------------------
// Raw kernels, templated on the scalar type so verification can run the same
// code paths in 64-bit. Convolution convention throughout: true 2D
// convolution with kernel indices in [-(k-1)/2, (k-1)/2], zero padding,
// output size = input size. Accumulation is double regardless of T.
// ---------------------------------------------------------------------------
namespace kernels {

// One view of the forward model: out(x,y) = sum_z conv2d(vol_z, psf_z)(x,y).
// `psf_view` holds nz contiguous k*k slices. Overwrites `out`.
template <typename T>
void project_view(const T* vol, int nx, int ny, int nz, const T* psf_view, int k, T* out) {
    const int h = (k - 1) / 2;
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    parallel_for(ny, [&](std::int64_t yb, std::int64_t ye) {
        std::vector<double> acc(static_cast<std::size_t>(nx));
        for (std::int64_t y = yb; y < ye; ++y) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int z = 0; z < nz; ++z) {
                const T* vz = vol + plane * z;
                const T* ker = psf_view + static_cast<std::size_t>(z) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    const std::int64_t yy = y - (ky - h);
                    if (yy < 0 || yy >= ny) continue;
                    const T* row = vz + yy * nx;
                    for (int kx = 0; kx < k; ++kx) {
                        const double w = static_cast<double>(ker[ky * k + kx]);
                        if (w == 0.0) continue;
                        const int shift = kx - h;
                        const int x0 = std::max(0, shift);
                        const int x1 = std::min(nx, nx + shift);
                        for (int x = x0; x < x1; ++x) acc[x] += w * static_cast<double>(row[x - shift]);
                    }
                }
            }
            T* orow = out + y * nx;
            for (int x = 0; x < nx; ++x) orow[x] = static_cast<T>(acc[x]);
        }
    });
}

// Adjoint of project_view over a set of views: for each depth z,
// out_z(x,y) = sum_views conv2d(err_view, flip(psf_z))(x,y), which equals the
// correlation with the unflipped kernel. Views accumulate in the given order.
// Overwrites `out` (nx*ny*nz).
template <typename T>
void back_project_views(const T* err, int nx, int ny, const T* psf, int k, int nz,
                        const int* views, int nviews, T* out) {
    const int h = (k - 1) / 2;
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    parallel_for(static_cast<std::int64_t>(nz) * ny, [&](std::int64_t b, std::int64_t e) {
        std::vector<double> acc(static_cast<std::size_t>(nx));
        for (std::int64_t i = b; i < e; ++i) {
            const int z = static_cast<int>(i / ny);
            const int y = static_cast<int>(i % ny);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int vi = 0; vi < nviews; ++vi) {
                const T* ev = err + plane * vi;
                const T* ker = psf + (static_cast<std::size_t>(views[vi]) * nz + z) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    const std::int64_t yy = y + (ky - h);
                    if (yy < 0 || yy >= ny) continue;
                    const T* row = ev + yy * nx;
                    for (int kx = 0; kx < k; ++kx) {
                        const double w = static_cast<double>(ker[ky * k + kx]);
                        if (w == 0.0) continue;
                        const int shift = kx - h;
                        const int x0 = std::max(0, -shift);
                        const int x1 = std::min(nx, nx - shift);
                        for (int x = x0; x < x1; ++x) acc[x] += w * static_cast<double>(row[x + shift]);
                    }
                }
            }
            T* orow = out + plane * z + static_cast<std::size_t>(y) * nx;
            for (int x = 0; x < nx; ++x) orow[x] = static_cast<T>(acc[x]);
        }
    });
}

// Forward model over an explicit view list; `out` holds nviews planes in
// list order.
template <typename T>
void forward_project_views(const T* vol, int nx, int ny, int nz, const T* psf, int k, int psf_nz,
                           const int* views, int nviews, T* out) {
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;
    for (int vi = 0; vi < nviews; ++vi) {
        const T* psf_view = psf + static_cast<std::size_t>(views[vi]) * psf_nz * k * k;
        project_view(vol, nx, ny, nz, psf_view, k, out + plane * vi);
    }
}

// dst(x,y) += w * src(x+dx, y+dy), zero-filled outside src. `dst` may be a
// wider type than `src` (double accumulator over float planes).
template <typename TD, typename T>
void add_shifted(TD* dst, const T* src, int nx, int ny, int dx, int dy, TD w) {
    const int y0 = std::max(0, -dy);
    const int y1 = std::min(ny, ny - dy);
    const int x0 = std::max(0, -dx);
    const int x1 = std::min(nx, nx - dx);
    for (int y = y0; y < y1; ++y) {
        TD* drow = dst + static_cast<std::size_t>(y) * nx;
        const T* srow = src + static_cast<std::size_t>(y + dy) * nx + dx;
        for (int x = x0; x < x1; ++x) drow[x] += w * static_cast<TD>(srow[x]);
    }
}

} // namespace kernels

// ---------------------------------------------------------------------------
// Domain-type operations (float storage, double accumulation).
// ---------------------------------------------------------------------------

// Eq.-1-style measurement: LFI(u,x,y) = sum_z conv2d(v_z, psf(u,z))(x,y).
LightField forward_project(const Volume& v, const PsfStack& p);

// Exact adjoint of forward_project; the result reuses the Volume container
// but may be signed.
Volume back_project(const ErrorField& e, const PsfStack& p);

// Same operator applied to a measured (nonnegative) light field.
Volume back_project(const LightField& lf, const PsfStack& p);

// Translate each per-view feature plane by the negated centroid offset for
// every depth, then aggregate over views. Zero fill at exposed borders.
AlignedFeatures align_features(const FeatureMapSet& f, const AlignKernelStack& ks,
                               Aggregate aggregate = Aggregate::Mean);

} // namespace v2v3d
