#include "v2v3d/psf.hpp"

#include <cmath>
#include <string>

namespace v2v3d {

void PsfConfig::validate() const {
    if (nu < 2) throw ConfigError("psf.nu must be >= 2, got " + std::to_string(nu));
    if (k < 1 || k % 2 == 0) throw ConfigError("psf.k must be odd and positive, got " + std::to_string(k));
    if (nz < 1) throw ConfigError("psf.nz must be >= 1, got " + std::to_string(nz));
    if (!(sigma0 > 0.0)) throw ConfigError("psf.sigma0 must be > 0");
    if (sigma_slope < 0.0) throw ConfigError("psf.sigma_slope must be >= 0");
}

PsfConfig psf_config_from(const Config& cfg) {
    PsfConfig c;
    c.nu = static_cast<int>(cfg.get_int("psf.nu", 13));
    c.k = static_cast<int>(cfg.get_int("psf.k", 9));
    c.nz = static_cast<int>(cfg.get_int("psf.nz", 8));
    c.z_focal = cfg.get_real("psf.z_focal", 0.5 * (c.nz - 1));
    c.ring_radius_tan = cfg.get_real("psf.ring_radius_tan", 0.5);
    c.shift_scale = cfg.get_real("psf.shift_scale", 1.0);
    c.sigma0 = cfg.get_real("psf.sigma0", 1.0);
    c.sigma_slope = cfg.get_real("psf.sigma_slope", 0.15);
    c.validate();
    return c;
}

std::pair<double, double> view_direction(const PsfConfig& cfg, int u) {
    if (u == 0) return {0.0, 0.0};
    const double phi = 2.0 * M_PI * static_cast<double>(u - 1) / static_cast<double>(cfg.nu - 1);
    return {cfg.ring_radius_tan * std::cos(phi), cfg.ring_radius_tan * std::sin(phi)};
}

PsfStack synthesize_psf(const PsfConfig& cfg) {
    cfg.validate();
    PsfStack p(cfg.nu, cfg.k, cfg.nz);
    const double center = 0.5 * (cfg.k - 1);
    const double hw = 0.5 * (cfg.k - 1);

    for (int u = 0; u < cfg.nu; ++u) {
        const auto [tx, ty] = view_direction(cfg, u);
        for (int z = 0; z < cfg.nz; ++z) {
            const double z_rel = static_cast<double>(z) - cfg.z_focal;
            const double cx = cfg.shift_scale * z_rel * tx;
            const double cy = cfg.shift_scale * z_rel * ty;
            // Reject slices whose mass would fall (almost) entirely outside
            // the support: center more than half a support past the edge.
            if (std::abs(cx) > 2.0 * hw || std::abs(cy) > 2.0 * hw) {
                throw GeometryError("psf slice center off support: u=" + std::to_string(u) + " z=" + std::to_string(z) +
                                    " offset=(" + std::to_string(cx) + "," + std::to_string(cy) + ") with k=" + std::to_string(cfg.k));
            }
            const double sigma = cfg.sigma0 + cfg.sigma_slope * std::abs(z_rel);
            const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

            float* s = p.slice(u, z);
            double sum = 0.0;
            for (int ky = 0; ky < cfg.k; ++ky) {
                const double dy = static_cast<double>(ky) - center - cy;
                for (int kx = 0; kx < cfg.k; ++kx) {
                    const double dx = static_cast<double>(kx) - center - cx;
                    const double v = std::exp(-(dx * dx + dy * dy) * inv2s2);
                    s[ky * cfg.k + kx] = static_cast<float>(v);
                    sum += v;
                }
            }
            if (!(sum > 0.0)) {
                throw GeometryError("psf slice has vanishing mass: u=" + std::to_string(u) + " z=" + std::to_string(z));
            }
            const double inv = 1.0 / sum;
            for (int i = 0; i < cfg.k * cfg.k; ++i) {
                s[i] = static_cast<float>(static_cast<double>(s[i]) * inv);
            }
        }
    }
    p.normalized = true;
    return p;
}

PsfStack flip_psf(const PsfStack& p) {
    PsfStack out(p.nu, p.k, p.nz);
    out.normalized = p.normalized;
    for (int u = 0; u < p.nu; ++u) {
        for (int z = 0; z < p.nz; ++z) {
            const float* src = p.slice(u, z);
            float* dst = out.slice(u, z);
            for (int ky = 0; ky < p.k; ++ky) {
                for (int kx = 0; kx < p.k; ++kx) {
                    dst[(p.k - 1 - ky) * p.k + (p.k - 1 - kx)] = src[ky * p.k + kx];
                }
            }
        }
    }
    return out;
}

// Round toward the center on exact .5 fractions so offsets stay inside the
// support and the result does not depend on the platform rounding mode.
static int round_toward_zero_on_tie(double t) {
    return t >= 0.0 ? static_cast<int>(std::ceil(t - 0.5)) : static_cast<int>(std::floor(t + 0.5));
}

AlignKernelStack extract_centroid_kernels(const PsfStack& p) {
    AlignKernelStack ks(p.nu, p.nz, p.half_width());
    const double center = 0.5 * (p.k - 1);
    for (int u = 0; u < p.nu; ++u) {
        for (int z = 0; z < p.nz; ++z) {
            const float* s = p.slice(u, z);
            double sum = 0.0, mx = 0.0, my = 0.0;
            for (int ky = 0; ky < p.k; ++ky) {
                for (int kx = 0; kx < p.k; ++kx) {
                    const double w = s[ky * p.k + kx];
                    sum += w;
                    mx += w * kx;
                    my += w * ky;
                }
            }
            if (!(sum > 0.0)) {
                throw DataError("degenerate PSF slice (zero sum) at u=" + std::to_string(u) + " z=" + std::to_string(z));
            }
            const int dx = round_toward_zero_on_tie(mx / sum - center);
            const int dy = round_toward_zero_on_tie(my / sum - center);
            ks.offset(u, z) = {dx, dy};
        }
    }
    return ks;
}

} // namespace v2v3d
