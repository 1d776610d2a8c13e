#pragma once

#include <cstdint>
#include <string>

#include "v2v3d/config.hpp"
#include "v2v3d/psf.hpp"
#include "v2v3d/types.hpp"

namespace v2v3d {

enum class PhantomKind { Beads, Filaments, Mixed };

PhantomKind phantom_kind_from(const std::string& name);
std::string to_string(PhantomKind kind);

// Synthetic ground-truth volumes. `radius` is the bead radius for beads and
// the full thickness (diameter) for filaments; structures are painted with
// max blending so voxel values stay in [lo, hi].
struct PhantomConfig {
    PhantomKind kind = PhantomKind::Beads;
    int nx = 32, ny = 32, nz = 8;
    int count = 5;
    double lo = 50.0, hi = 100.0;
    double radius = 2.0;
    std::uint64_t seed = 1;

    void validate() const;
};

// Sensor model: out = max(0, in + offset + N(0, sigma^2)), i.i.d. per pixel.
// `offset` is the true background level the de-crosstalk loss later relies on.
struct NoiseConfig {
    double sigma = 0.0;
    double offset = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
};

PhantomConfig phantom_config_from(const Config& cfg);
NoiseConfig noise_config_from(const Config& cfg);

// Deterministic in cfg.seed. RNG consumption order is part of the contract
// (tests replay it): beads draw cx, cy, cz, intensity per bead; filaments
// draw start xyz, direction xyz (normals), intensity, then 3 normals per walk
// step; mixed paints ceil(count/2) beads first, then filaments, from one
// stream.
Volume generate_phantom(const PhantomConfig& cfg);

// Per-view noise substream seed = cfg.seed XOR view index, so views are
// independent by construction and the result does not depend on thread count.
LightField add_noise(const LightField& lf, const NoiseConfig& cfg);

struct DatasetPaths {
    std::string volume;
    std::string clean_lf;
    std::string noisy_lf;
    std::string psf;
    std::string manifest;
};

// Writes ground truth, clean LF, noisy LF, and PSF into out_dir plus a
// manifest (flat `key = value`, re-parseable as a Config) recording paths and
// every generating parameter.
DatasetPaths make_dataset(const PhantomConfig& phantom_cfg, const PsfConfig& psf_cfg,
                          const NoiseConfig& noise_cfg, const std::string& out_dir);

} // namespace v2v3d
