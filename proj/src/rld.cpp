#include "v2v3d/rld.hpp"

#include <algorithm>
#include <cmath>

#include "v2v3d/errors.hpp"
#include "v2v3d/optics.hpp"

namespace v2v3d {

void RldConfig::validate() const {
    if (iterations < 0) throw ConfigError("rld: iterations must be >= 0");
    if (!(epsilon > 0.0)) throw ConfigError("rld: epsilon must be > 0");
}

RldConfig rld_config_from(const Config& cfg) {
    RldConfig r;
    r.iterations = static_cast<int>(cfg.get_int("rld.iterations", r.iterations));
    r.epsilon = cfg.get_real("rld.epsilon", r.epsilon);
    const std::string init = cfg.get_enum("rld.init", {"uniform", "backproject"}, "uniform");
    r.init = init == "uniform" ? RldInit::Uniform : RldInit::Backproject;
    r.validate();
    return r;
}

namespace {

void check_shapes(const Volume& v, const LightField& lf, const PsfStack& p) {
    if (v.nx != lf.nx || v.ny != lf.ny)
        throw ShapeError("rld: volume is " + std::to_string(v.nx) + "x" + std::to_string(v.ny) +
                         ", light field is " + std::to_string(lf.nx) + "x" + std::to_string(lf.ny));
    if (v.nz != p.nz)
        throw ShapeError("rld: volume has " + std::to_string(v.nz) + " planes, psf has " +
                         std::to_string(p.nz));
    if (lf.nu != p.nu)
        throw ShapeError("rld: light field has " + std::to_string(lf.nu) + " views, psf has " +
                         std::to_string(p.nu));
}

Volume normalization_field(const LightField& lf, const PsfStack& p) {
    ErrorField ones(lf.nu, lf.nx, lf.ny);
    std::fill(ones.data.begin(), ones.data.end(), 1.0f);
    return back_project(ones, p);
}

Volume rld_step_with_norm(const Volume& v, const LightField& lf, const PsfStack& p, double eps,
                          const Volume& norm) {
    const LightField pred = forward_project(v, p);
    ErrorField ratio(lf.nu, lf.nx, lf.ny);
    for (std::size_t i = 0; i < ratio.data.size(); ++i)
        ratio.data[i] = static_cast<float>(static_cast<double>(lf.data[i]) /
                                           (static_cast<double>(pred.data[i]) + eps));
    Volume update = back_project(ratio, p);
    Volume out(v.nx, v.ny, v.nz);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(static_cast<double>(v.data[i]) *
                                         static_cast<double>(update.data[i]) /
                                         (static_cast<double>(norm.data[i]) + eps));
    return out;
}

} // namespace

Volume rld_step(const Volume& v, const LightField& lf, const PsfStack& p, double eps) {
    check_shapes(v, lf, p);
    if (!(eps > 0.0)) throw ConfigError("rld_step: eps must be > 0");
    return rld_step_with_norm(v, lf, p, eps, normalization_field(lf, p));
}

double poisson_loglik(const LightField& lf, const LightField& pred, double eps) {
    if (lf.nu != pred.nu || lf.nx != pred.nx || lf.ny != pred.ny)
        throw ShapeError("poisson_loglik: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < lf.data.size(); ++i) {
        const double l = static_cast<double>(pred.data[i]);
        acc += static_cast<double>(lf.data[i]) * std::log(l + eps) - l;
    }
    return acc;
}

RldResult rld_solve(const LightField& lf, const PsfStack& p, const RldConfig& cfg) {
    cfg.validate();
    RldResult res;
    if (cfg.init == RldInit::Uniform) {
        double sum = 0.0;
        for (const float x : lf.data) sum += static_cast<double>(x);
        const float mean = lf.data.empty() ? 0.0f : static_cast<float>(sum / lf.data.size());
        res.volume = Volume(lf.nx, lf.ny, p.nz);
        std::fill(res.volume.data.begin(), res.volume.data.end(), mean);
    } else {
        res.volume = back_project(lf, p);
        for (float& x : res.volume.data) x = std::max(0.0f, x);
    }
    check_shapes(res.volume, lf, p);

    const Volume norm = normalization_field(lf, p);
    res.loglik.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int it = 0; it < cfg.iterations; ++it) {
        res.volume = rld_step_with_norm(res.volume, lf, p, cfg.epsilon, norm);
        res.loglik.push_back(poisson_loglik(lf, forward_project(res.volume, p), cfg.epsilon));
    }
    return res;
}

} // namespace v2v3d
