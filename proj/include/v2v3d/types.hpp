#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "v2v3d/errors.hpp"

namespace v2v3d {

// 3D nonnegative intensity grid, the reconstruction target.
// Layout: x fastest, then y, then z.
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    std::vector<float> data;

    Volume() = default;
    Volume(int nx_, int ny_, int nz_, float fill = 0.0f)
        : nx(nx_), ny(ny_), nz(nz_), data(static_cast<std::size_t>(nx_) * ny_ * nz_, fill) {}

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * z);
    }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }

    const float* slice(int z) const { return data.data() + static_cast<std::size_t>(nx) * ny * z; }
    float* slice(int z) { return data.data() + static_cast<std::size_t>(nx) * ny * z; }
};

// Stack of 2D views, the measurement. Layout: x fastest, then y, then view.
struct LightField {
    int nu = 0, nx = 0, ny = 0;
    std::vector<float> data;

    LightField() = default;
    LightField(int nu_, int nx_, int ny_, float fill = 0.0f)
        : nu(nu_), nx(nx_), ny(ny_), data(static_cast<std::size_t>(nu_) * nx_ * ny_, fill) {}

    std::size_t size() const { return static_cast<std::size_t>(nu) * nx * ny; }
    std::size_t pixels_per_view() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t index(int u, int x, int y) const {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * u);
    }
    float& at(int u, int x, int y) { return data[index(u, x, y)]; }
    float at(int u, int x, int y) const { return data[index(u, x, y)]; }

    const float* view(int u) const { return data.data() + pixels_per_view() * u; }
    float* view(int u) { return data.data() + pixels_per_view() * u; }
};

// LightField-shaped residual; values may be negative.
struct ErrorField {
    int nu = 0, nx = 0, ny = 0;
    std::vector<float> data;

    ErrorField() = default;
    ErrorField(int nu_, int nx_, int ny_, float fill = 0.0f)
        : nu(nu_), nx(nx_), ny(ny_), data(static_cast<std::size_t>(nu_) * nx_ * ny_, fill) {}

    std::size_t size() const { return static_cast<std::size_t>(nu) * nx * ny; }
    std::size_t pixels_per_view() const { return static_cast<std::size_t>(nx) * ny; }
    const float* view(int u) const { return data.data() + pixels_per_view() * u; }
    float* view(int u) { return data.data() + pixels_per_view() * u; }
    float& at(int u, int x, int y) {
        return data[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * u)];
    }
};

// 4D kernel bank: one k-by-k kernel per (view, depth). k is odd.
// Layout: kx fastest, then ky, then z, then u, so a (u, z) slice is a
// contiguous k*k block.
struct PsfStack {
    int nu = 0, k = 0, nz = 0;
    bool normalized = false;
    std::vector<float> data;

    PsfStack() = default;
    PsfStack(int nu_, int k_, int nz_, float fill = 0.0f)
        : nu(nu_), k(k_), nz(nz_), data(static_cast<std::size_t>(nu_) * k_ * k_ * nz_, fill) {}

    std::size_t size() const { return static_cast<std::size_t>(nu) * k * k * nz; }
    int half_width() const { return (k - 1) / 2; }
    std::size_t slice_offset(int u, int z) const {
        return (static_cast<std::size_t>(u) * nz + z) * k * k;
    }
    const float* slice(int u, int z) const { return data.data() + slice_offset(u, z); }
    float* slice(int u, int z) { return data.data() + slice_offset(u, z); }
    float& at(int u, int kx, int ky, int z) {
        return data[slice_offset(u, z) + static_cast<std::size_t>(ky) * k + kx];
    }
    float at(int u, int kx, int ky, int z) const {
        return data[slice_offset(u, z) + static_cast<std::size_t>(ky) * k + kx];
    }
};

// Per-(view, depth) integer centroid offsets; each encodes a single-pixel
// unit-impulse alignment kernel.
struct AlignKernelStack {
    int nu = 0, nz = 0;
    int max_offset = 0; // kernel half-width bound, |dx|,|dy| <= max_offset
    std::vector<std::array<int, 2>> offsets; // indexed u*nz + z

    AlignKernelStack() = default;
    AlignKernelStack(int nu_, int nz_, int max_offset_)
        : nu(nu_), nz(nz_), max_offset(max_offset_), offsets(static_cast<std::size_t>(nu_) * nz_, {0, 0}) {}

    const std::array<int, 2>& offset(int u, int z) const { return offsets[static_cast<std::size_t>(u) * nz + z]; }
    std::array<int, 2>& offset(int u, int z) { return offsets[static_cast<std::size_t>(u) * nz + z]; }
};

// Disjoint, exhaustive partition of view indices into two subsets whose
// sizes differ by at most one.
struct ViewSplit {
    std::vector<int> subset_a;
    std::vector<int> subset_b;
};

} // namespace v2v3d
