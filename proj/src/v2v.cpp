#include "v2v3d/v2v.hpp"

#include <algorithm>
#include <cmath>

#include "v2v3d/errors.hpp"
#include "v2v3d/v2v_model.hpp"

namespace v2v3d {

void V2vConfig::validate() const {
    if (encoder_channels < 1) throw ConfigError("train.encoder_channels must be >= 1");
    if (encoder_depth < 1) throw ConfigError("train.encoder_depth must be >= 1");
    if (decoder_scales != 2)
        throw ConfigError("train.decoder_scales: this build supports exactly 2 scales");
    if (final_activation != "relu")
        throw ConfigError("train.final_activation: only 'relu' is supported");
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("train: alpha and beta must be >= 0");
    if (steps < 1) throw ConfigError("train.steps must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
}

V2vConfig v2v_config_from(const Config& cfg) {
    V2vConfig v;
    v.encoder_channels = static_cast<int>(cfg.get_int("train.encoder_channels", v.encoder_channels));
    v.encoder_depth = static_cast<int>(cfg.get_int("train.encoder_depth", v.encoder_depth));
    v.decoder_scales = static_cast<int>(cfg.get_int("train.decoder_scales", v.decoder_scales));
    v.final_activation = cfg.get_enum("train.final_activation", {"relu"}, v.final_activation);
    v.alpha = cfg.get_real("train.alpha", v.alpha);
    v.beta = cfg.get_real("train.beta", v.beta);
    v.fft_mode = cfg.get_enum("train.fft_mode", {"l2", "l1"}, "l2") == "l2" ? FftMode::L2 : FftMode::L1;
    v.steps = static_cast<int>(cfg.get_int("train.steps", v.steps));
    v.lr = cfg.get_real("train.lr", v.lr);
    v.seed = cfg.get_u64("train.seed", v.seed);
    v.bg_override = cfg.get_optional_real("train.bg_override");
    v.disable_split = cfg.get_bool("train.disable_split", v.disable_split);
    v.disable_align = cfg.get_bool("train.disable_align", v.disable_align);
    v.validate();
    return v;
}

Precision precision_from(const std::string& name) {
    if (name == "f32") return Precision::F32;
    if (name == "f64") return Precision::F64;
    throw ConfigError("precision must be f32 or f64, got '" + name + "'");
}

ViewSplit split_views(int nu) {
    if (nu < 2) throw DataError("split_views: need at least 2 views, got " + std::to_string(nu));
    ViewSplit s;
    for (int u = 0; u < nu; ++u)
        (u % 2 == 0 ? s.subset_a : s.subset_b).push_back(u);
    return s;
}

double estimate_background(const LightField& lf) {
    if (lf.data.empty()) throw DataError("estimate_background: empty light field");
    float lo = lf.data[0], hi = lf.data[0];
    for (const float x : lf.data) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (lo == hi) return static_cast<double>(lo);
    constexpr int kBins = 256;
    const double width = (static_cast<double>(hi) - lo) / kBins;
    std::array<std::int64_t, kBins> counts{};
    for (const float x : lf.data) {
        int b = static_cast<int>((static_cast<double>(x) - lo) / width);
        b = std::clamp(b, 0, kBins - 1);
        counts[static_cast<std::size_t>(b)] += 1;
    }
    int mode = 0;
    for (int b = 1; b < kBins; ++b)
        if (counts[static_cast<std::size_t>(b)] > counts[static_cast<std::size_t>(mode)]) mode = b;
    return static_cast<double>(lo) + (mode + 0.5) * width;
}

Volume fuse(const Volume& va, const Volume& vb) {
    if (va.nx != vb.nx || va.ny != vb.ny || va.nz != vb.nz)
        throw ShapeError("fuse: volume shapes differ");
    Volume out(va.nx, va.ny, va.nz);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(
            0.5 * (static_cast<double>(va.data[i]) + static_cast<double>(vb.data[i])));
    return out;
}

TrainOutput train(const LightField& lf, const PsfStack& psf, const V2vConfig& cfg, Precision precision) {
    return precision == Precision::F32 ? v2v_detail::train_impl<float>(lf, psf, cfg)
                                       : v2v_detail::train_impl<double>(lf, psf, cfg);
}

} // namespace v2v3d
