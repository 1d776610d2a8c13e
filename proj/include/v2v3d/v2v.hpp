#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "v2v3d/config.hpp"
#include "v2v3d/nn/checkpoint.hpp"
#include "v2v3d/types.hpp"
#include "v2v3d/v2v_graph.hpp"

namespace v2v3d {

struct V2vConfig {
    int encoder_channels = 16;
    int encoder_depth = 2;   // number of encoder conv layers
    int decoder_scales = 2;  // resolution levels in the decoder U-Net
    std::string final_activation = "relu";
    double alpha = 0.1; // FFT-loss weight
    double beta = 1.0;  // de-crosstalk weight
    FftMode fft_mode = FftMode::L2;
    int steps = 2000;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::optional<double> bg_override; // skip background estimation when set
    bool disable_split = false;        // ablation: both branches see all views
    bool disable_align = false;        // ablation: zero centroid offsets

    void validate() const;
};

V2vConfig v2v_config_from(const Config& cfg);

enum class Precision { F32, F64 };
Precision precision_from(const std::string& name);

// Interleaved split around the view ring: even indices to a, odd to b.
ViewSplit split_views(int nu);

// Histogram mode over all pixels: 256 uniform bins spanning [min, max],
// background = center of the fullest bin, ties to the lower bin.
double estimate_background(const LightField& lf);

// Elementwise mean of the two branch volumes.
Volume fuse(const Volume& va, const Volume& vb);

struct LossRow {
    int step = 0;
    double total = 0.0;
    double mse = 0.0; // per-term values are pre-weighting
    double fft = 0.0;
    double dc = 0.0;
};

struct TrainOutput {
    Volume fused;
    Volume volume_a;
    Volume volume_b;
    std::vector<LossRow> log;
    std::vector<nn::NamedArray> weights;
    double bg_used = 0.0;
};

// Per-scene unsupervised optimization on one noisy light field. Both
// branches contribute to every step's loss; deterministic for a fixed seed.
TrainOutput train(const LightField& lf, const PsfStack& psf, const V2vConfig& cfg,
                  Precision precision = Precision::F32);

} // namespace v2v3d
