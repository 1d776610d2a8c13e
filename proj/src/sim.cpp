#include "v2v3d/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "v2v3d/errors.hpp"
#include "v2v3d/io.hpp"
#include "v2v3d/optics.hpp"
#include "v2v3d/parallel.hpp"
#include "v2v3d/rng.hpp"

namespace v2v3d {

PhantomKind phantom_kind_from(const std::string& name) {
    if (name == "beads") return PhantomKind::Beads;
    if (name == "filaments") return PhantomKind::Filaments;
    if (name == "mixed") return PhantomKind::Mixed;
    throw ConfigError("unknown phantom kind '" + name + "' (expected beads, filaments, or mixed)");
}

std::string to_string(PhantomKind kind) {
    switch (kind) {
        case PhantomKind::Beads: return "beads";
        case PhantomKind::Filaments: return "filaments";
        case PhantomKind::Mixed: return "mixed";
    }
    return "?";
}

void PhantomConfig::validate() const {
    if (nx < 1 || ny < 1 || nz < 1)
        throw ConfigError("phantom: all dimensions must be >= 1");
    if (count < 1) throw ConfigError("phantom: count must be >= 1");
    if (lo < 0.0) throw ConfigError("phantom: intensity lo must be >= 0");
    if (hi < lo) throw ConfigError("phantom: intensity hi must be >= lo");
    if (radius < 0.0) throw ConfigError("phantom: radius must be >= 0");
}

void NoiseConfig::validate() const {
    if (sigma < 0.0) throw ConfigError("noise: sigma must be >= 0");
    if (offset < 0.0) throw ConfigError("noise: offset must be >= 0");
}

PhantomConfig phantom_config_from(const Config& cfg) {
    PhantomConfig p;
    p.kind = phantom_kind_from(cfg.get_str("phantom.kind", to_string(p.kind)));
    p.nx = static_cast<int>(cfg.get_int("phantom.nx", p.nx));
    p.ny = static_cast<int>(cfg.get_int("phantom.ny", p.ny));
    p.nz = static_cast<int>(cfg.get_int("phantom.nz", p.nz));
    p.count = static_cast<int>(cfg.get_int("phantom.count", p.count));
    p.lo = cfg.get_real("phantom.lo", p.lo);
    p.hi = cfg.get_real("phantom.hi", p.hi);
    p.radius = cfg.get_real("phantom.radius", p.radius);
    p.seed = cfg.get_u64("phantom.seed", p.seed);
    p.validate();
    return p;
}

NoiseConfig noise_config_from(const Config& cfg) {
    NoiseConfig n;
    n.sigma = cfg.get_real("noise.sigma", n.sigma);
    n.offset = cfg.get_real("noise.offset", n.offset);
    n.seed = cfg.get_u64("noise.seed", n.seed);
    n.validate();
    return n;
}

namespace {

// Paints every voxel within Euclidean distance r of c, plus the voxel nearest
// to c so that r = 0 still leaves a mark. Max blend.
void paint_ball(Volume& v, double cx, double cy, double cz, double r, float value) {
    const auto clampi = [](long v_, int n) { return static_cast<int>(std::clamp<long>(v_, 0, n - 1)); };
    const int mx = clampi(std::lround(cx), v.nx);
    const int my = clampi(std::lround(cy), v.ny);
    const int mz = clampi(std::lround(cz), v.nz);
    v.at(mx, my, mz) = std::max(v.at(mx, my, mz), value);
    if (r <= 0.0) return;
    const int x0 = std::max(0, static_cast<int>(std::ceil(cx - r)));
    const int x1 = std::min(v.nx - 1, static_cast<int>(std::floor(cx + r)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(cy - r)));
    const int y1 = std::min(v.ny - 1, static_cast<int>(std::floor(cy + r)));
    const int z0 = std::max(0, static_cast<int>(std::ceil(cz - r)));
    const int z1 = std::min(v.nz - 1, static_cast<int>(std::floor(cz + r)));
    const double r2 = r * r;
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - cx, dy = y - cy, dz = z - cz;
                if (dx * dx + dy * dy + dz * dz <= r2)
                    v.at(x, y, z) = std::max(v.at(x, y, z), value);
            }
}

void paint_beads(Volume& v, Rng& rng, int count, const PhantomConfig& cfg) {
    for (int i = 0; i < count; ++i) {
        const double cx = rng.uniform(0.0, cfg.nx - 1.0);
        const double cy = rng.uniform(0.0, cfg.ny - 1.0);
        const double cz = rng.uniform(0.0, cfg.nz - 1.0);
        const float val = static_cast<float>(rng.uniform(cfg.lo, cfg.hi));
        paint_ball(v, cx, cy, cz, cfg.radius, val);
    }
}

void paint_filaments(Volume& v, Rng& rng, int count, const PhantomConfig& cfg) {
    const int steps = 2 * std::max({cfg.nx, cfg.ny, cfg.nz});
    const double step_len = 0.75;
    const double wobble = 0.35;
    const double paint_r = 0.5 * cfg.radius; // field is full thickness here
    for (int i = 0; i < count; ++i) {
        double px = rng.uniform(0.0, cfg.nx - 1.0);
        double py = rng.uniform(0.0, cfg.ny - 1.0);
        double pz = rng.uniform(0.0, cfg.nz - 1.0);
        double dx = rng.normal(), dy = rng.normal(), dz = rng.normal();
        double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (norm < 1e-12) { dx = 1.0; dy = 0.0; dz = 0.0; norm = 1.0; }
        dx /= norm; dy /= norm; dz /= norm;
        const float val = static_cast<float>(rng.uniform(cfg.lo, cfg.hi));
        paint_ball(v, px, py, pz, paint_r, val);
        for (int s = 0; s < steps; ++s) {
            px += step_len * dx;
            py += step_len * dy;
            pz += step_len * dz;
            // Reflect at the walls and bounce the direction component.
            const auto reflect = [](double& p, double& d, double hi_) {
                if (p < 0.0) { p = -p; d = -d; }
                if (p > hi_) { p = 2.0 * hi_ - p; d = -d; }
            };
            reflect(px, dx, cfg.nx - 1.0);
            reflect(py, dy, cfg.ny - 1.0);
            reflect(pz, dz, cfg.nz - 1.0);
            dx += wobble * rng.normal();
            dy += wobble * rng.normal();
            dz += wobble * rng.normal();
            norm = std::sqrt(dx * dx + dy * dy + dz * dz);
            if (norm < 1e-12) { dx = 1.0; dy = 0.0; dz = 0.0; norm = 1.0; }
            dx /= norm; dy /= norm; dz /= norm;
            paint_ball(v, px, py, pz, paint_r, val);
        }
    }
}

} // namespace

Volume generate_phantom(const PhantomConfig& cfg) {
    cfg.validate();
    Volume v(cfg.nx, cfg.ny, cfg.nz);
    Rng rng(cfg.seed);
    switch (cfg.kind) {
        case PhantomKind::Beads:
            paint_beads(v, rng, cfg.count, cfg);
            break;
        case PhantomKind::Filaments:
            paint_filaments(v, rng, cfg.count, cfg);
            break;
        case PhantomKind::Mixed: {
            const int nb = (cfg.count + 1) / 2;
            paint_beads(v, rng, nb, cfg);
            paint_filaments(v, rng, cfg.count - nb, cfg);
            break;
        }
    }
    return v;
}

LightField add_noise(const LightField& lf, const NoiseConfig& cfg) {
    cfg.validate();
    LightField out(lf.nu, lf.nx, lf.ny);
    parallel_for(lf.nu, [&](std::int64_t ub, std::int64_t ue) {
        for (std::int64_t u = ub; u < ue; ++u) {
            Rng rng(cfg.seed ^ static_cast<std::uint64_t>(u));
            const float* src = lf.view(static_cast<int>(u));
            float* dst = out.view(static_cast<int>(u));
            const std::size_t n = lf.pixels_per_view();
            if (cfg.sigma > 0.0) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double raw = static_cast<double>(src[i]) + cfg.offset + cfg.sigma * rng.normal();
                    dst[i] = static_cast<float>(std::max(0.0, raw));
                }
            } else {
                for (std::size_t i = 0; i < n; ++i)
                    dst[i] = static_cast<float>(std::max(0.0, static_cast<double>(src[i]) + cfg.offset));
            }
        }
    });
    return out;
}

DatasetPaths make_dataset(const PhantomConfig& phantom_cfg, const PsfConfig& psf_cfg,
                          const NoiseConfig& noise_cfg, const std::string& out_dir) {
    phantom_cfg.validate();
    psf_cfg.validate();
    noise_cfg.validate();
    if (phantom_cfg.nz != psf_cfg.nz)
        throw ConfigError("make_dataset: phantom.nz (" + std::to_string(phantom_cfg.nz) +
                          ") must match psf.nz (" + std::to_string(psf_cfg.nz) + ")");

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    DatasetPaths paths;
    paths.volume = (fs::path(out_dir) / "ground_truth.vol").string();
    paths.clean_lf = (fs::path(out_dir) / "clean.lf").string();
    paths.noisy_lf = (fs::path(out_dir) / "noisy.lf").string();
    paths.psf = (fs::path(out_dir) / "psf.psf").string();
    paths.manifest = (fs::path(out_dir) / "manifest.txt").string();

    const Volume gt = generate_phantom(phantom_cfg);
    const PsfStack psf = synthesize_psf(psf_cfg);
    const LightField clean = forward_project(gt, psf);
    const LightField noisy = add_noise(clean, noise_cfg);

    write_volume(paths.volume, gt);
    write_lightfield(paths.clean_lf, clean);
    write_lightfield(paths.noisy_lf, noisy);
    write_psf(paths.psf, psf);

    std::ofstream m(paths.manifest);
    if (!m) throw Error("cannot write " + paths.manifest);
    m << "paths.volume = " << paths.volume << "\n"
      << "paths.clean_lf = " << paths.clean_lf << "\n"
      << "paths.noisy_lf = " << paths.noisy_lf << "\n"
      << "paths.psf = " << paths.psf << "\n"
      << "phantom.kind = " << to_string(phantom_cfg.kind) << "\n"
      << "phantom.nx = " << phantom_cfg.nx << "\n"
      << "phantom.ny = " << phantom_cfg.ny << "\n"
      << "phantom.nz = " << phantom_cfg.nz << "\n"
      << "phantom.count = " << phantom_cfg.count << "\n";
    m.precision(17);
    m << "phantom.lo = " << phantom_cfg.lo << "\n"
      << "phantom.hi = " << phantom_cfg.hi << "\n"
      << "phantom.radius = " << phantom_cfg.radius << "\n"
      << "phantom.seed = " << phantom_cfg.seed << "\n"
      << "psf.nu = " << psf_cfg.nu << "\n"
      << "psf.k = " << psf_cfg.k << "\n"
      << "psf.nz = " << psf_cfg.nz << "\n"
      << "psf.z_focal = " << psf_cfg.z_focal << "\n"
      << "psf.ring_radius_tan = " << psf_cfg.ring_radius_tan << "\n"
      << "psf.shift_scale = " << psf_cfg.shift_scale << "\n"
      << "psf.sigma0 = " << psf_cfg.sigma0 << "\n"
      << "psf.sigma_slope = " << psf_cfg.sigma_slope << "\n"
      << "noise.sigma = " << noise_cfg.sigma << "\n"
      << "noise.offset = " << noise_cfg.offset << "\n"
      << "noise.seed = " << noise_cfg.seed << "\n";
    if (!m) throw Error("short write on " + paths.manifest);
    return paths;
}

} // namespace v2v3d
