#pragma once

#include <cmath>
#include <memory>

#include "v2v3d/nn/adam.hpp"
#include "v2v3d/nn/ops.hpp"
#include "v2v3d/psf.hpp"
#include "v2v3d/rng.hpp"
#include "v2v3d/v2v.hpp"
#include "v2v3d/v2v_graph.hpp"

// The two-branch model itself, templated on the compute scalar. Float is the
// production path; the double instantiation backs gradient checks and the
// byte-identical determinism runs.

namespace v2v3d {

// Immutable per-run description of the measured scene: dimensions, PSF data
// in compute precision, centroid offsets, and per-view pixels.
template <typename T>
struct Scene {
    int nu = 0, nx = 0, ny = 0, nz = 0, k = 0;
    std::shared_ptr<const std::vector<T>> psf;
    AlignKernelStack align;
    std::vector<std::vector<T>> view_pixels;

    static Scene from(const LightField& lf, const PsfStack& p) {
        if (lf.nu != p.nu)
            throw ShapeError("scene: light field has " + std::to_string(lf.nu) + " views, psf has " +
                             std::to_string(p.nu));
        Scene s;
        s.nu = lf.nu;
        s.nx = lf.nx;
        s.ny = lf.ny;
        s.nz = p.nz;
        s.k = p.k;
        s.psf = std::make_shared<const std::vector<T>>(p.data.begin(), p.data.end());
        s.align = extract_centroid_kernels(p);
        s.view_pixels.resize(static_cast<std::size_t>(lf.nu));
        for (int u = 0; u < lf.nu; ++u)
            s.view_pixels[static_cast<std::size_t>(u)].assign(lf.view(u), lf.view(u) + lf.pixels_per_view());
        return s;
    }

    nn::NodePtr<T> view_leaf(int u) const {
        return nn::leaf<T>(nn::Shape::of({1, ny, nx}), view_pixels[static_cast<std::size_t>(u)], false);
    }

    // Stack the listed views into one [n,ny,nx] constant node.
    nn::NodePtr<T> stack_views(const std::vector<int>& views) const {
        std::vector<T> data;
        data.reserve(views.size() * view_pixels[0].size());
        for (const int u : views) {
            const auto& px = view_pixels[static_cast<std::size_t>(u)];
            data.insert(data.end(), px.begin(), px.end());
        }
        return nn::leaf<T>(nn::Shape::of({static_cast<int>(views.size()), ny, nx}), std::move(data), false);
    }
};

template <typename T>
struct V2vModel {
    V2vConfig cfg;
    int nz = 0;

    // Encoder shared across views and branches; decoders independent.
    std::vector<nn::Param<T>> enc_w, enc_b;
    struct Decoder {
        nn::Param<T> in_w, in_b, down_w, down_b, up_w, up_b, out_w, out_b;
    };
    Decoder dec[2];

    static V2vModel create(const V2vConfig& cfg, int nz) {
        cfg.validate();
        V2vModel m;
        m.cfg = cfg;
        m.nz = nz;
        const int nc = cfg.encoder_channels;
        for (int i = 0; i < cfg.encoder_depth; ++i) {
            const int ci = i == 0 ? 1 : nc;
            m.enc_w.emplace_back("enc" + std::to_string(i) + ".w", nn::Shape::of({nc, ci, 3, 3}));
            m.enc_b.emplace_back("enc" + std::to_string(i) + ".b", nn::Shape::of({nc}));
        }
        for (int d = 0; d < 2; ++d) {
            const std::string p = d == 0 ? "decA." : "decB.";
            Decoder& dd = m.dec[d];
            dd.in_w = nn::Param<T>(p + "in.w", nn::Shape::of({nc, nz * nc, 3, 3}));
            dd.in_b = nn::Param<T>(p + "in.b", nn::Shape::of({nc}));
            dd.down_w = nn::Param<T>(p + "down.w", nn::Shape::of({2 * nc, nc, 3, 3}));
            dd.down_b = nn::Param<T>(p + "down.b", nn::Shape::of({2 * nc}));
            dd.up_w = nn::Param<T>(p + "up.w", nn::Shape::of({nc, 3 * nc, 3, 3}));
            dd.up_b = nn::Param<T>(p + "up.b", nn::Shape::of({nc}));
            dd.out_w = nn::Param<T>(p + "out.w", nn::Shape::of({nz, nc, 3, 3}));
            dd.out_b = nn::Param<T>(p + "out.b", nn::Shape::of({nz}));
        }
        m.init_weights(cfg.seed);
        return m;
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> ps;
        for (std::size_t i = 0; i < enc_w.size(); ++i) {
            ps.push_back(&enc_w[i]);
            ps.push_back(&enc_b[i]);
        }
        for (auto& d : dec) {
            ps.push_back(&d.in_w);
            ps.push_back(&d.in_b);
            ps.push_back(&d.down_w);
            ps.push_back(&d.down_b);
            ps.push_back(&d.up_w);
            ps.push_back(&d.up_b);
            ps.push_back(&d.out_w);
            ps.push_back(&d.out_b);
        }
        return ps;
    }

    // Fan-in-scaled normal init for conv weights, zero biases, one stream in
    // parameter order so f32/f64 share the draw sequence.
    void init_weights(std::uint64_t seed) {
        Rng rng(seed);
        for (nn::Param<T>* p : params()) {
            if (p->shape.rank != 4) continue; // biases stay zero
            const int fan_in = p->shape[1] * p->shape[2] * p->shape[3];
            const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (T& v : p->value) v = static_cast<T>(rng.normal() * std_dev);
        }
    }

    void attach_all() {
        for (nn::Param<T>* p : params()) p->attach();
    }
    void detach_all() {
        for (nn::Param<T>* p : params()) p->detach();
    }

    std::vector<nn::NamedArray> snapshot() {
        std::vector<nn::NamedArray> out;
        for (nn::Param<T>* p : params()) {
            nn::NamedArray a;
            a.name = p->name;
            for (int i = 0; i < p->shape.rank; ++i)
                a.dims.push_back(static_cast<std::uint32_t>(p->shape[i]));
            a.data.assign(p->value.begin(), p->value.end());
            out.push_back(std::move(a));
        }
        return out;
    }

    nn::NodePtr<T> encode_view(const nn::NodePtr<T>& view) {
        nn::NodePtr<T> x = view;
        for (std::size_t i = 0; i < enc_w.size(); ++i)
            x = nn::leaky_relu(nn::conv2d(x, enc_w[i].node, enc_b[i].node));
        return x;
    }

    nn::NodePtr<T> decode_volume(int branch, const nn::NodePtr<T>& aligned) {
        Decoder& d = dec[branch];
        auto f0 = nn::leaky_relu(nn::conv2d(aligned, d.in_w.node, d.in_b.node));
        auto f1 = nn::leaky_relu(nn::conv2d(nn::avgpool2(f0), d.down_w.node, d.down_b.node));
        auto up = nn::upsample_nearest2(f1);
        auto f2 = nn::leaky_relu(nn::conv2d(nn::concat_channels<T>({f0, up}), d.up_w.node, d.up_b.node));
        return nn::relu(nn::conv2d(f2, d.out_w.node, d.out_b.node)); // final_activation
    }
};

template <typename T>
struct BranchOutput {
    nn::NodePtr<T> volume;    // [nz,h,w], nonnegative
    nn::NodePtr<T> sim_views; // [n_sim,h,w]
    std::vector<int> sim_indices;
};

// One branch: encode the input subset, align by centroid offsets of those
// views, decode, then simulate the complementary subset through the physics
// operator. Params must be attached.
template <typename T>
BranchOutput<T> branch_forward(V2vModel<T>& model, int branch, const Scene<T>& scene,
                               const std::vector<int>& input_views,
                               const std::vector<int>& sim_views) {
    std::vector<nn::NodePtr<T>> feats;
    feats.reserve(input_views.size());
    for (const int u : input_views) feats.push_back(model.encode_view(scene.view_leaf(u)));

    std::vector<std::array<int, 2>> offsets(input_views.size() * static_cast<std::size_t>(scene.nz),
                                            {0, 0});
    if (!model.cfg.disable_align)
        for (std::size_t p = 0; p < input_views.size(); ++p)
            for (int z = 0; z < scene.nz; ++z)
                offsets[p * static_cast<std::size_t>(scene.nz) + static_cast<std::size_t>(z)] =
                    scene.align.offset(input_views[p], z);

    auto aligned = graph::align_merge<T>(feats, std::move(offsets), scene.nz);
    BranchOutput<T> out;
    out.volume = model.decode_volume(branch, aligned);
    out.sim_indices = sim_views;
    out.sim_views = graph::project_views<T>(out.volume, scene.psf, scene.k, scene.nz, scene.nu, sim_views);
    return out;
}

namespace v2v_detail {

template <typename T>
Volume node_to_volume(const nn::NodePtr<T>& vol, int nx, int ny, int nz) {
    Volume v(nx, ny, nz);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(vol->value[i]);
    return v;
}

inline void check_disjoint(const std::vector<int>& input, const std::vector<int>& supervision) {
    for (const int a : input)
        for (const int b : supervision)
            if (a == b)
                throw Error("train: view " + std::to_string(a) +
                            " appears in both input and supervision sets");
}

template <typename T>
TrainOutput train_impl(const LightField& lf, const PsfStack& psf, const V2vConfig& cfg) {
    cfg.validate();
    const Scene<T> scene = Scene<T>::from(lf, psf);
    if (scene.ny % 2 || scene.nx % 2)
        throw ShapeError("train: view dimensions must be even for the 2-scale decoder");

    const ViewSplit split = split_views(lf.nu);
    std::vector<int> all_views(static_cast<std::size_t>(lf.nu));
    for (int u = 0; u < lf.nu; ++u) all_views[static_cast<std::size_t>(u)] = u;

    // input[i] feeds branch i, supervision[i] is what its loss reads. The
    // disjointness of the two is the anti-identity-mapping guarantee; only
    // the split ablation is allowed to break it.
    const std::vector<int> input[2] = {cfg.disable_split ? all_views : split.subset_a,
                                       cfg.disable_split ? all_views : split.subset_b};
    const std::vector<int> supervision[2] = {cfg.disable_split ? all_views : split.subset_b,
                                             cfg.disable_split ? all_views : split.subset_a};
    if (!cfg.disable_split) {
        check_disjoint(input[0], supervision[0]);
        check_disjoint(input[1], supervision[1]);
    }

    const double bg = cfg.bg_override ? *cfg.bg_override : estimate_background(lf);

    V2vModel<T> model = V2vModel<T>::create(cfg, scene.nz);
    const std::vector<nn::Param<T>*> params = model.params();

    TrainOutput out;
    out.bg_used = bg;
    out.log.reserve(static_cast<std::size_t>(cfg.steps));

    for (int step = 1; step <= cfg.steps; ++step) {
        model.attach_all();
        nn::NodePtr<T> total;
        double mse_sum = 0.0, fft_sum = 0.0, dc_sum = 0.0;
        for (int b = 0; b < 2; ++b) {
            BranchOutput<T> br = branch_forward(model, b, scene, input[b], supervision[b]);
            auto real = scene.stack_views(supervision[b]);
            auto l_mse = graph::mse_loss(br.sim_views, real);
            auto l_fft = graph::fft_loss(br.sim_views, real, cfg.fft_mode);
            auto l_dc = graph::dc_loss(br.volume, bg);
            mse_sum += static_cast<double>(l_mse->value[0]);
            fft_sum += static_cast<double>(l_fft->value[0]);
            dc_sum += static_cast<double>(l_dc->value[0]);
            auto branch_loss =
                nn::add(nn::add(l_mse, nn::scale(l_fft, cfg.alpha)), nn::scale(l_dc, cfg.beta));
            total = total ? nn::add(total, branch_loss) : branch_loss;
        }
        const double total_v = static_cast<double>(total->value[0]);
        if (!std::isfinite(total_v))
            throw NumericError("train: loss is not finite at step " + std::to_string(step) +
                               " (total=" + std::to_string(total_v) + ", mse=" + std::to_string(mse_sum) +
                               ", fft=" + std::to_string(fft_sum) + ", dc=" + std::to_string(dc_sum) + ")");
        nn::backward(total);
        nn::adam_step(params, cfg.lr);
        model.detach_all();
        out.log.push_back({step, total_v, mse_sum, fft_sum, dc_sum});
    }

    // Volumes from the final weights.
    model.attach_all();
    BranchOutput<T> fa = branch_forward(model, 0, scene, input[0], supervision[0]);
    BranchOutput<T> fb = branch_forward(model, 1, scene, input[1], supervision[1]);
    out.volume_a = node_to_volume(fa.volume, scene.nx, scene.ny, scene.nz);
    out.volume_b = node_to_volume(fb.volume, scene.nx, scene.ny, scene.nz);
    model.detach_all();
    out.fused = fuse(out.volume_a, out.volume_b);
    out.weights = model.snapshot();
    return out;
}

} // namespace v2v_detail
} // namespace v2v3d
