#pragma once

#include <vector>

#include "v2v3d/config.hpp"
#include "v2v3d/types.hpp"

namespace v2v3d {

enum class RldInit { Uniform, Backproject };

struct RldConfig {
    int iterations = 100;
    double epsilon = 1e-8; // divide guard
    RldInit init = RldInit::Uniform;

    void validate() const;
};

RldConfig rld_config_from(const Config& cfg);

// Multiplicative Richardson-Lucy update for the multi-view model:
//   v' = v * back_project(lf / (forward_project(v) + eps)) / (back_project(1) + eps)
// Nonnegative in, nonnegative out; a zero voxel stays zero.
Volume rld_step(const Volume& v, const LightField& lf, const PsfStack& p, double eps);

// Poisson data fit sum(lf * log(pred + eps) - pred); larger is better.
double poisson_loglik(const LightField& lf, const LightField& pred, double eps);

struct RldResult {
    Volume volume;
    std::vector<double> loglik; // one entry per iteration, after the update
};

// Init: uniform = constant volume at mean(lf); backproject = back_project(lf)
// clipped at zero. The normalization field back_project(1) is fixed per
// geometry and computed once.
RldResult rld_solve(const LightField& lf, const PsfStack& p, const RldConfig& cfg);

} // namespace v2v3d
