#include "v2v3d/optics.hpp"

#include <numeric>

#include "v2v3d/errors.hpp"

namespace v2v3d {

LightField forward_project(const Volume& v, const PsfStack& p) {
    if (v.nz != p.nz)
        throw ShapeError("forward_project: volume has " + std::to_string(v.nz) + " planes, psf has " +
                         std::to_string(p.nz));
    LightField lf(p.nu, v.nx, v.ny);
    std::vector<int> views(static_cast<std::size_t>(p.nu));
    std::iota(views.begin(), views.end(), 0);
    kernels::forward_project_views(v.data.data(), v.nx, v.ny, v.nz, p.data.data(), p.k, p.nz,
                                   views.data(), p.nu, lf.data.data());
    return lf;
}

Volume back_project(const ErrorField& e, const PsfStack& p) {
    if (e.nu != p.nu)
        throw ShapeError("back_project: field has " + std::to_string(e.nu) + " views, psf has " +
                         std::to_string(p.nu));
    Volume out(e.nx, e.ny, p.nz);
    std::vector<int> views(static_cast<std::size_t>(p.nu));
    std::iota(views.begin(), views.end(), 0);
    kernels::back_project_views(e.data.data(), e.nx, e.ny, p.data.data(), p.k, p.nz,
                                views.data(), p.nu, out.data.data());
    return out;
}

Volume back_project(const LightField& lf, const PsfStack& p) {
    if (lf.nu != p.nu)
        throw ShapeError("back_project: field has " + std::to_string(lf.nu) + " views, psf has " +
                         std::to_string(p.nu));
    Volume out(lf.nx, lf.ny, p.nz);
    std::vector<int> views(static_cast<std::size_t>(p.nu));
    std::iota(views.begin(), views.end(), 0);
    kernels::back_project_views(lf.data.data(), lf.nx, lf.ny, p.data.data(), p.k, p.nz,
                                views.data(), p.nu, out.data.data());
    return out;
}

AlignedFeatures align_features(const FeatureMapSet& f, const AlignKernelStack& ks, Aggregate aggregate) {
    if (f.nu != ks.nu)
        throw ShapeError("align_features: " + std::to_string(f.nu) + " feature views vs " +
                         std::to_string(ks.nu) + " kernel views");
    (void)aggregate; // Mean is the only aggregate.
    AlignedFeatures out(ks.nz, f.nc, f.nx, f.ny);
    const double inv_nu = 1.0 / static_cast<double>(f.nu);
    parallel_for(static_cast<std::int64_t>(ks.nz) * f.nc, [&](std::int64_t b, std::int64_t e) {
        std::vector<double> acc(f.plane_pixels());
        for (std::int64_t i = b; i < e; ++i) {
            const int z = static_cast<int>(i / f.nc);
            const int c = static_cast<int>(i % f.nc);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int u = 0; u < f.nu; ++u) {
                const auto d = ks.offset(u, z);
                kernels::add_shifted(acc.data(), f.plane(u, c), f.nx, f.ny, d[0], d[1], inv_nu);
            }
            float* dst = out.plane(z, c);
            for (std::size_t px = 0; px < acc.size(); ++px) dst[px] = static_cast<float>(acc[px]);
        }
    });
    return out;
}

} // namespace v2v3d
