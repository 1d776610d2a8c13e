#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <limits>
#include <functional>
#include <set>
#include <vector>

#include "v2v3d/errors.hpp"
#include "v2v3d/nn/dft.hpp"
#include "v2v3d/optics.hpp"
#include "v2v3d/parallel.hpp"
#include "v2v3d/psf.hpp"
#include "v2v3d/rng.hpp"
#include "v2v3d/v2v.hpp"
#include "v2v3d/v2v_graph.hpp"
#include "v2v3d/v2v_model.hpp"

using namespace v2v3d;
using nn::NodePtr;
using nn::Shape;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

void gradcheck(const std::vector<double>& x0, Shape shape,
               const std::function<NodePtr<double>(const NodePtr<double>&)>& build,
               double tol = 1e-5, double h = 1e-3) {
    auto xleaf = nn::leaf<double>(shape, x0, true);
    auto loss = build(xleaf);
    REQUIRE(loss->value.size() == 1);
    nn::backward(loss);
    const std::vector<double> analytic = xleaf->grad;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        std::vector<double> xp = x0, xm = x0;
        xp[i] += h;
        xm[i] -= h;
        const double fp = build(nn::leaf<double>(shape, xp, false))->value[0];
        const double fm = build(nn::leaf<double>(shape, xm, false))->value[0];
        const double numeric = (fp - fm) / (2.0 * h);
        CHECK(std::abs(analytic[i] - numeric) <= tol * std::max(1.0, std::abs(numeric)));
    }
}

PsfStack tiny_psf(int nu, int k, int nz) {
    PsfConfig pc;
    pc.nu = nu;
    pc.k = k;
    pc.nz = nz;
    pc.z_focal = 0.5 * (nz - 1);
    pc.ring_radius_tan = 0.4;
    pc.shift_scale = 1.0;
    pc.sigma0 = 0.8;
    pc.sigma_slope = 0.1;
    return synthesize_psf(pc);
}

LightField random_lf(Rng& rng, int nu, int nx, int ny, float lo = 0.0f, float hi = 1.0f) {
    LightField lf(nu, nx, ny);
    for (float& v : lf.data) v = static_cast<float>(rng.uniform(lo, hi));
    return lf;
}

} // namespace

TEST_SUITE("v2v.split") {

TEST_CASE("even indices to a, odd to b") {
    const ViewSplit s = split_views(4);
    CHECK(s.subset_a == std::vector<int>{0, 2});
    CHECK(s.subset_b == std::vector<int>{1, 3});
}

TEST_CASE("13 views split 7/6, disjoint, complete") {
    const ViewSplit s = split_views(13);
    CHECK(s.subset_a.size() == 7);
    CHECK(s.subset_b.size() == 6);
    std::set<int> seen(s.subset_a.begin(), s.subset_a.end());
    for (const int u : s.subset_b) CHECK(seen.insert(u).second);
    CHECK(seen.size() == 13);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 12);
}

TEST_CASE("partition property for all nu in 2..32") {
    for (int nu = 2; nu <= 32; ++nu) {
        const ViewSplit s = split_views(nu);
        std::set<int> seen;
        for (const int u : s.subset_a) CHECK(seen.insert(u).second);
        for (const int u : s.subset_b) CHECK(seen.insert(u).second);
        CHECK(static_cast<int>(seen.size()) == nu);
        CHECK(std::abs(static_cast<int>(s.subset_a.size()) - static_cast<int>(s.subset_b.size())) <= 1);
        for (const int u : seen) CHECK((u >= 0 && u < nu));
    }
}

TEST_CASE("fewer than two views is an error") {
    CHECK_THROWS_AS(split_views(1), DataError);
    CHECK_THROWS_AS(split_views(0), DataError);
}

} // TEST_SUITE

TEST_SUITE("v2v.config") {

TEST_CASE("defaults validate") {
    V2vConfig cfg;
    CHECK(cfg.encoder_channels == 16);
    CHECK(cfg.encoder_depth == 2);
    CHECK(cfg.decoder_scales == 2);
    CHECK(cfg.alpha == 0.1);
    CHECK(cfg.beta == 1.0);
    CHECK(cfg.fft_mode == FftMode::L2);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("invalid settings are rejected") {
    V2vConfig cfg;
    cfg.decoder_scales = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = V2vConfig{};
    cfg.alpha = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = V2vConfig{};
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = V2vConfig{};
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = V2vConfig{};
    cfg.final_activation = "sigmoid";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config text round trip") {
    const Config c = Config::parse_string("train.alpha = 0.25\n"
                                   "train.beta = 0\n"
                                   "train.fft_mode = l1\n"
                                   "train.steps = 17\n"
                                   "train.lr = 0.005\n"
                                   "train.seed = 99\n"
                                   "train.encoder_channels = 8\n"
                                   "train.bg_override = 1.5\n"
                                   "train.disable_align = true\n",
                                   "t.cfg");
    const V2vConfig v = v2v_config_from(c);
    CHECK(v.alpha == 0.25);
    CHECK(v.beta == 0.0);
    CHECK(v.fft_mode == FftMode::L1);
    CHECK(v.steps == 17);
    CHECK(v.lr == 0.005);
    CHECK(v.seed == 99);
    CHECK(v.encoder_channels == 8);
    REQUIRE(v.bg_override.has_value());
    CHECK(*v.bg_override == 1.5);
    CHECK(v.disable_align);
    CHECK(!v.disable_split);
}

TEST_CASE("precision names") {
    CHECK(precision_from("f32") == Precision::F32);
    CHECK(precision_from("f64") == Precision::F64);
    CHECK_THROWS_AS(precision_from("f16"), ConfigError);
}

} // TEST_SUITE

TEST_SUITE("v2v.background") {

TEST_CASE("constant field returns that constant") {
    LightField lf(2, 4, 4, 7.25f);
    CHECK(estimate_background(lf) == 7.25);
}

TEST_CASE("mode wins: 90% at 10, 10% at 100") {
    LightField lf(1, 10, 10);
    for (int i = 0; i < 90; ++i) lf.data[static_cast<std::size_t>(i)] = 10.0f;
    for (int i = 90; i < 100; ++i) lf.data[static_cast<std::size_t>(i)] = 100.0f;
    const double width = 90.0 / 256.0;
    CHECK(estimate_background(lf) == doctest::Approx(10.0 + 0.5 * width).epsilon(1e-12));
}

TEST_CASE("clipped-gaussian background with sparse bright signal") {
    Rng rng(401);
    LightField lf(1, 256, 256);
    for (float& v : lf.data) v = static_cast<float>(std::max(0.0, rng.normal(20.0, 3.0)));
    const std::size_t n_bright = lf.data.size() / 50; // 2% bright outliers
    for (std::size_t i = 0; i < n_bright; ++i) {
        const int idx = rng.uniform_int(0, static_cast<int>(lf.data.size()) - 1);
        lf.data[static_cast<std::size_t>(idx)] = static_cast<float>(rng.uniform(100.0, 200.0));
    }
    const double bg = estimate_background(lf);
    CHECK(bg == doctest::Approx(20.0).epsilon(0.075)); // within +-1.5
}

TEST_CASE("empty field is an error") {
    LightField lf;
    CHECK_THROWS_AS(estimate_background(lf), DataError);
}

} // TEST_SUITE

TEST_SUITE("v2v.fuse") {

TEST_CASE("identical inputs pass through") {
    Rng rng(402);
    Volume v(3, 4, 2);
    for (float& x : v.data) x = static_cast<float>(rng.uniform(-1.0, 5.0));
    const Volume f = fuse(v, v);
    CHECK(f.data == v.data);
}

TEST_CASE("zero and two average to one") {
    Volume a(4, 4, 2, 0.0f), b(4, 4, 2, 2.0f);
    const Volume f = fuse(a, b);
    for (const float x : f.data) CHECK(x == 1.0f);
}

TEST_CASE("scaling by two commutes exactly") {
    Rng rng(403);
    Volume a(5, 3, 2), b(5, 3, 2);
    for (float& x : a.data) x = static_cast<float>(rng.uniform(0.0, 1.0));
    for (float& x : b.data) x = static_cast<float>(rng.uniform(0.0, 1.0));
    Volume a2 = a, b2 = b;
    for (float& x : a2.data) x *= 2.0f;
    for (float& x : b2.data) x *= 2.0f;
    const Volume f = fuse(a, b);
    const Volume f2 = fuse(a2, b2);
    for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(f2.data[i] == 2.0f * f.data[i]);
}

TEST_CASE("shape mismatch is an error") {
    Volume a(4, 4, 2), b(4, 4, 3);
    CHECK_THROWS_AS(fuse(a, b), ShapeError);
}

} // TEST_SUITE

TEST_SUITE("v2v.losses") {

TEST_CASE("mse examples") {
    auto a = nn::leaf<double>(Shape::of({2}), {0.0, 2.0}, false);
    auto b = nn::leaf<double>(Shape::of({2}), {0.0, 0.0}, false);
    CHECK(graph::mse_loss(a, b)->value[0] == doctest::Approx(2.0));
    CHECK(graph::mse_loss(a, a)->value[0] == 0.0);

    Rng rng(404);
    const auto ad = random_vec(rng, 60);
    const auto bd = random_vec(rng, 60);
    double want = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) want += (ad[i] - bd[i]) * (ad[i] - bd[i]);
    want /= static_cast<double>(ad.size());
    auto an = nn::leaf<double>(Shape::of({3, 4, 5}), ad, false);
    auto bn = nn::leaf<double>(Shape::of({3, 4, 5}), bd, false);
    CHECK(graph::mse_loss(an, bn)->value[0] == doctest::Approx(want).epsilon(1e-12));

    auto bad = nn::leaf<double>(Shape::of({2, 4, 5}), std::vector<double>(40, 0.0), false);
    CHECK_THROWS_AS(graph::mse_loss(an, bad), ShapeError);

    gradcheck(ad, Shape::of({3, 4, 5}), [&](const NodePtr<double>& x) {
        return graph::mse_loss(x, nn::leaf<double>(Shape::of({3, 4, 5}), bd, false));
    }, 1e-6);
}

TEST_CASE("fft loss: identical inputs vanish in both modes") {
    Rng rng(405);
    const auto d = random_vec(rng, 2 * 4 * 6);
    auto a = nn::leaf<double>(Shape::of({2, 4, 6}), d, false);
    auto b = nn::leaf<double>(Shape::of({2, 4, 6}), d, false);
    CHECK(graph::fft_loss(a, b, FftMode::L2)->value[0] == 0.0);
    CHECK(graph::fft_loss(a, b, FftMode::L1)->value[0] == 0.0);
}

TEST_CASE("fft l2: constant difference hits only the DC bin") {
    // a - b = c everywhere on an m-pixel view -> |m c|^2 / m = m c^2
    const int h = 4, w = 5;
    const double c = 0.3;
    std::vector<double> ad(static_cast<std::size_t>(h) * w), bd(ad.size());
    Rng rng(406);
    for (std::size_t i = 0; i < ad.size(); ++i) {
        bd[i] = rng.uniform(-1.0, 1.0);
        ad[i] = bd[i] + c;
    }
    auto a = nn::leaf<double>(Shape::of({1, h, w}), ad, false);
    auto b = nn::leaf<double>(Shape::of({1, h, w}), bd, false);
    CHECK(graph::fft_loss(a, b, FftMode::L2)->value[0] ==
          doctest::Approx(h * w * c * c).epsilon(1e-9));
}

TEST_CASE("fft l2 equals m times mse by Parseval") {
    Rng rng(407);
    for (const auto [nv, h, w] : {std::tuple{1, 8, 8}, std::tuple{3, 6, 10}, std::tuple{2, 7, 7}}) {
        const std::size_t n = static_cast<std::size_t>(nv) * h * w;
        const auto ad = random_vec(rng, n);
        const auto bd = random_vec(rng, n);
        auto a = nn::leaf<double>(Shape::of({nv, h, w}), ad, false);
        auto b = nn::leaf<double>(Shape::of({nv, h, w}), bd, false);
        const double fft = graph::fft_loss(a, b, FftMode::L2)->value[0];
        const double mse = graph::mse_loss(a, b)->value[0];
        CHECK(std::abs(fft - h * w * mse) <= 1e-9 * std::abs(fft));
    }
}

TEST_CASE("fft l1 matches a direct spectrum oracle") {
    Rng rng(408);
    const int nv = 2, h = 4, w = 6;
    const std::size_t m = static_cast<std::size_t>(h) * w;
    const auto ad = random_vec(rng, nv * m);
    const auto bd = random_vec(rng, nv * m);
    double want = 0.0;
    for (int v = 0; v < nv; ++v) {
        const auto sa = nn::dft2(ad.data() + m * v, h, w);
        const auto sb = nn::dft2(bd.data() + m * v, h, w);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += std::abs(sa[i] - sb[i]);
        want += acc / static_cast<double>(m);
    }
    want /= nv;
    auto a = nn::leaf<double>(Shape::of({nv, h, w}), ad, false);
    auto b = nn::leaf<double>(Shape::of({nv, h, w}), bd, false);
    CHECK(graph::fft_loss(a, b, FftMode::L1)->value[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("fft loss gradchecks in both modes") {
    Rng rng(409);
    const auto ad = random_vec(rng, 2 * 4 * 4);
    const auto bd = random_vec(rng, 2 * 4 * 4);
    gradcheck(ad, Shape::of({2, 4, 4}), [&](const NodePtr<double>& x) {
        return graph::fft_loss(x, nn::leaf<double>(Shape::of({2, 4, 4}), bd, false), FftMode::L2);
    }, 1e-6);
    gradcheck(ad, Shape::of({2, 4, 4}), [&](const NodePtr<double>& x) {
        return graph::fft_loss(x, nn::leaf<double>(Shape::of({2, 4, 4}), bd, false), FftMode::L1);
    }, 1e-4);
}

TEST_CASE("dc loss examples and gradcheck") {
    auto ok = nn::leaf<double>(Shape::of({4}), {1.0, 2.0, 3.0, 1.0}, false);
    CHECK(graph::dc_loss(ok, 1.0)->value[0] == 0.0);
    auto dip = nn::leaf<double>(Shape::of({3}), {2.0, 0.5, 2.0}, false);
    CHECK(graph::dc_loss(dip, 1.0)->value[0] == doctest::Approx(0.5));

    Rng rng(410);
    const auto vd = random_vec(rng, 40, 0.0, 2.0);
    double want = 0.0;
    for (const double v : vd) want += std::max(0.0, 1.0 - v);
    auto vn = nn::leaf<double>(Shape::of({40}), vd, false);
    CHECK(graph::dc_loss(vn, 1.0)->value[0] == doctest::Approx(want).epsilon(1e-12));

    // keep every voxel at least 2h away from the kink so FD stays one-sided
    std::vector<double> safe(30);
    for (double& v : safe) {
        v = rng.uniform(0.01, 0.95);
        if (std::abs(v - 0.5) < 0.01) v += 0.02;
    }
    gradcheck(safe, Shape::of({30}),
              [&](const NodePtr<double>& x) { return graph::dc_loss(x, 0.5); }, 1e-6);
}

TEST_CASE("weighted total reduces to mse when alpha and beta vanish") {
    Rng rng(411);
    const auto ad = random_vec(rng, 1 * 4 * 4, 0.0, 1.0);
    const auto bd = random_vec(rng, 1 * 4 * 4, 0.0, 1.0);
    auto a = nn::leaf<double>(Shape::of({1, 4, 4}), ad, false);
    auto b = nn::leaf<double>(Shape::of({1, 4, 4}), bd, false);
    auto mse = graph::mse_loss(a, b);
    auto total = nn::add(nn::add(mse, nn::scale(graph::fft_loss(a, b, FftMode::L2), 0.0)),
                         nn::scale(graph::dc_loss(a, 0.2), 0.0));
    CHECK(total->value[0] == mse->value[0]);
}

} // TEST_SUITE

TEST_SUITE("v2v.graph_ops") {

TEST_CASE("project_views matches the optics kernel and rejects bad shapes") {
    Rng rng(412);
    const PsfStack psf = tiny_psf(3, 5, 2);
    const int nx = 8, ny = 6, nz = 2;
    const auto vd = random_vec(rng, static_cast<std::size_t>(nx) * ny * nz, 0.0, 1.0);
    auto psfd = std::make_shared<const std::vector<double>>(psf.data.begin(), psf.data.end());

    auto vol = nn::leaf<double>(Shape::of({nz, ny, nx}), vd, false);
    auto out = graph::project_views<double>(vol, psfd, psf.k, psf.nz, psf.nu, {0, 2});

    Volume v(nx, ny, nz);
    for (std::size_t i = 0; i < vd.size(); ++i) v.data[i] = static_cast<float>(vd[i]);
    const LightField all = forward_project(v, psf);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const std::size_t px = static_cast<std::size_t>(y) * nx + x;
            CHECK(out->value[px] == doctest::Approx(all.at(0, x, y)).epsilon(1e-5));
            CHECK(out->value[all.pixels_per_view() + px] ==
                  doctest::Approx(all.at(2, x, y)).epsilon(1e-5));
        }

    auto flat = nn::leaf<double>(Shape::of({nz * ny * nx}), vd, false);
    CHECK_THROWS_AS(graph::project_views<double>(flat, psfd, psf.k, psf.nz, psf.nu, {0}), ShapeError);
    CHECK_THROWS_AS(graph::project_views<double>(vol, psfd, psf.k, 3, psf.nu, {0}), ShapeError);
    CHECK_THROWS_AS(graph::project_views<double>(vol, psfd, psf.k, psf.nz, psf.nu, {3}), ShapeError);
}

TEST_CASE("project_views gradcheck against the adjoint backward") {
    Rng rng(413);
    const PsfStack psf = tiny_psf(3, 3, 2);
    const int nx = 5, ny = 4, nz = 2;
    const auto vd = random_vec(rng, static_cast<std::size_t>(nx) * ny * nz, 0.0, 1.0);
    const auto td = random_vec(rng, static_cast<std::size_t>(nx) * ny * 2, 0.0, 1.0);
    auto psfd = std::make_shared<const std::vector<double>>(psf.data.begin(), psf.data.end());
    auto target = nn::leaf<double>(Shape::of({2, ny, nx}), td, false);
    gradcheck(vd, Shape::of({nz, ny, nx}), [&](const NodePtr<double>& x) {
        return graph::mse_loss(graph::project_views<double>(x, psfd, psf.k, psf.nz, psf.nu, {0, 2}),
                               target);
    }, 1e-6);
}

TEST_CASE("align_merge with zero offsets averages the views") {
    Rng rng(414);
    const int nc = 2, h = 4, w = 5, nz = 3;
    const auto f0 = random_vec(rng, static_cast<std::size_t>(nc) * h * w);
    const auto f1 = random_vec(rng, static_cast<std::size_t>(nc) * h * w);
    std::vector<NodePtr<double>> feats = {nn::leaf<double>(Shape::of({nc, h, w}), f0, false),
                                          nn::leaf<double>(Shape::of({nc, h, w}), f1, false)};
    std::vector<std::array<int, 2>> offsets(2 * nz, {0, 0});
    auto merged = graph::align_merge<double>(feats, offsets, nz);
    REQUIRE(merged->shape == Shape::of({nz * nc, h, w}));
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int z = 0; z < nz; ++z)
        for (int c = 0; c < nc; ++c)
            for (std::size_t i = 0; i < plane; ++i) {
                const std::size_t src = plane * static_cast<std::size_t>(c) + i;
                const std::size_t dst = plane * (static_cast<std::size_t>(z) * nc + c) + i;
                CHECK(merged->value[dst] == doctest::Approx(0.5 * (f0[src] + f1[src])).epsilon(1e-12));
            }
}

TEST_CASE("align_merge translates by the negated offset") {
    // one view, one channel, offset (1,0) at z=0: out(x) = in(x+1)
    const int h = 3, w = 5;
    std::vector<double> fd(static_cast<std::size_t>(h) * w, 0.0);
    fd[1 * w + 2] = 1.0; // impulse at x=2,y=1
    std::vector<NodePtr<double>> feats = {nn::leaf<double>(Shape::of({1, h, w}), fd, false)};
    auto merged = graph::align_merge<double>(feats, {{1, 0}}, 1);
    CHECK(merged->value[1 * w + 1] == doctest::Approx(1.0));
    double total = 0.0;
    for (const double v : merged->value) total += v;
    CHECK(total == doctest::Approx(1.0));

    CHECK_THROWS_AS(graph::align_merge<double>(feats, {{0, 0}, {0, 0}}, 1), ShapeError);
}

TEST_CASE("align_merge gradcheck with mixed offsets") {
    Rng rng(415);
    const int nc = 1, h = 4, w = 4, nz = 2;
    const auto f0 = random_vec(rng, static_cast<std::size_t>(nc) * h * w);
    const auto f1 = random_vec(rng, static_cast<std::size_t>(nc) * h * w);
    const auto td = random_vec(rng, static_cast<std::size_t>(nz) * nc * h * w);
    auto target = nn::leaf<double>(Shape::of({nz * nc, h, w}), td, false);
    const std::vector<std::array<int, 2>> offsets = {{0, 0}, {1, -1}, {-2, 0}, {1, 1}};
    gradcheck(f0, Shape::of({nc, h, w}), [&](const NodePtr<double>& x) {
        std::vector<NodePtr<double>> feats = {x, nn::leaf<double>(Shape::of({nc, h, w}), f1, false)};
        return graph::mse_loss(graph::align_merge<double>(feats, offsets, nz), target);
    }, 1e-6);
}

} // TEST_SUITE

TEST_SUITE("v2v.model") {

TEST_CASE("shared encoder: identical views give identical features") {
    V2vConfig cfg;
    cfg.encoder_channels = 4;
    cfg.seed = 5;
    auto model = V2vModel<double>::create(cfg, 2);
    model.attach_all();
    Rng rng(416);
    const auto px = random_vec(rng, 6 * 6, 0.0, 1.0);
    auto fa = model.encode_view(nn::leaf<double>(Shape::of({1, 6, 6}), px, false));
    auto fb = model.encode_view(nn::leaf<double>(Shape::of({1, 6, 6}), px, false));
    CHECK(fa->value == fb->value);
    CHECK(fa->shape == Shape::of({4, 6, 6}));
    model.detach_all();
}

TEST_CASE("encoding is per-view: order does not matter") {
    V2vConfig cfg;
    cfg.encoder_channels = 3;
    cfg.seed = 6;
    auto model = V2vModel<double>::create(cfg, 2);
    model.attach_all();
    Rng rng(417);
    const auto p0 = random_vec(rng, 5 * 4, 0.0, 1.0);
    const auto p1 = random_vec(rng, 5 * 4, 0.0, 1.0);
    auto a_first = model.encode_view(nn::leaf<double>(Shape::of({1, 4, 5}), p0, false));
    auto b_second = model.encode_view(nn::leaf<double>(Shape::of({1, 4, 5}), p1, false));
    auto b_first = model.encode_view(nn::leaf<double>(Shape::of({1, 4, 5}), p1, false));
    auto a_second = model.encode_view(nn::leaf<double>(Shape::of({1, 4, 5}), p0, false));
    CHECK(a_first->value == a_second->value);
    CHECK(b_first->value == b_second->value);
    model.detach_all();
}

TEST_CASE("decoder produces a nonnegative volume of the right shape") {
    V2vConfig cfg;
    cfg.encoder_channels = 3;
    cfg.seed = 7;
    const int nz = 3, h = 6, w = 8;
    auto model = V2vModel<double>::create(cfg, nz);
    model.attach_all();
    Rng rng(418);
    const auto ad = random_vec(rng, static_cast<std::size_t>(nz) * 3 * h * w);
    auto vol = model.decode_volume(0, nn::leaf<double>(Shape::of({nz * 3, h, w}), ad, false));
    CHECK(vol->shape == Shape::of({nz, h, w}));
    for (const double v : vol->value) CHECK(v >= 0.0);
    model.detach_all();
}

TEST_CASE("branch simulates exactly the complementary subset") {
    const PsfStack psf = tiny_psf(5, 3, 2);
    Rng rng(419);
    const LightField lf = random_lf(rng, 5, 8, 6);
    const auto scene = Scene<double>::from(lf, psf);
    V2vConfig cfg;
    cfg.encoder_channels = 2;
    cfg.encoder_depth = 1;
    auto model = V2vModel<double>::create(cfg, psf.nz);
    model.attach_all();
    const ViewSplit split = split_views(5);
    auto out = branch_forward(model, 0, scene, split.subset_a, split.subset_b);
    CHECK(out.sim_indices == split.subset_b);
    CHECK(out.sim_views->shape == Shape::of({2, 6, 8}));
    CHECK(out.volume->shape == Shape::of({2, 6, 8}));
    model.detach_all();
}

TEST_CASE("branch simulated views equal the physics operator on the detached volume") {
    const PsfStack psf = tiny_psf(4, 5, 3);
    Rng rng(420);
    const LightField lf = random_lf(rng, 4, 10, 8);
    const auto scene = Scene<double>::from(lf, psf);
    V2vConfig cfg;
    cfg.encoder_channels = 3;
    auto model = V2vModel<double>::create(cfg, psf.nz);
    model.attach_all();
    const ViewSplit split = split_views(4);
    auto out = branch_forward(model, 1, scene, split.subset_b, split.subset_a);

    Volume v(lf.nx, lf.ny, psf.nz);
    for (std::size_t i = 0; i < v.data.size(); ++i)
        v.data[i] = static_cast<float>(out.volume->value[i]);
    const LightField all = forward_project(v, psf);
    const std::size_t ppv = all.pixels_per_view();
    for (std::size_t s = 0; s < out.sim_indices.size(); ++s) {
        const int u = out.sim_indices[s];
        for (std::size_t i = 0; i < ppv; ++i) {
            const double got = out.sim_views->value[ppv * s + i];
            const double want = static_cast<double>(all.view(u)[i]);
            CHECK(std::abs(got - want) <= 1e-5 * std::max(1.0, std::abs(want)));
        }
    }
    model.detach_all();
}

TEST_CASE("zero views through zero biases stay zero") {
    const PsfStack psf = tiny_psf(3, 3, 2);
    const LightField lf(3, 6, 6, 0.0f);
    const auto scene = Scene<double>::from(lf, psf);
    V2vConfig cfg;
    cfg.encoder_channels = 2;
    auto model = V2vModel<double>::create(cfg, psf.nz);
    model.attach_all();
    const ViewSplit split = split_views(3);
    auto out = branch_forward(model, 0, scene, split.subset_a, split.subset_b);
    for (const double v : out.volume->value) CHECK(v == 0.0);
    for (const double v : out.sim_views->value) CHECK(v == 0.0);
    model.detach_all();
}

} // TEST_SUITE

TEST_SUITE("v2v.train") {

struct TinyScene {
    PsfStack psf = tiny_psf(3, 3, 2);
    LightField lf;
    TinyScene() {
        Rng rng(421);
        lf = random_lf(rng, 3, 8, 8, 0.1f, 1.0f);
    }
    V2vConfig cfg() const {
        V2vConfig c;
        c.encoder_channels = 2;
        c.encoder_depth = 1;
        c.steps = 3;
        c.lr = 1e-3;
        c.seed = 11;
        return c;
    }
};

TEST_CASE("loss log shape and composition") {
    const TinyScene ts;
    const TrainOutput out = train(ts.lf, ts.psf, ts.cfg(), Precision::F64);
    REQUIRE(out.log.size() == 3);
    for (std::size_t i = 0; i < out.log.size(); ++i) {
        const LossRow& r = out.log[i];
        CHECK(r.step == static_cast<int>(i) + 1);
        CHECK(std::isfinite(r.total));
        // per-term columns are pre-weighting; total applies alpha and beta
        const V2vConfig cfg = ts.cfg();
        CHECK(r.total ==
              doctest::Approx(r.mse + cfg.alpha * r.fft + cfg.beta * r.dc).epsilon(1e-9));
        CHECK(r.mse >= 0.0);
        CHECK(r.fft >= 0.0);
        CHECK(r.dc >= 0.0);
    }
    CHECK(out.fused.nx == 8);
    CHECK(out.fused.ny == 8);
    CHECK(out.fused.nz == 2);
    for (const float v : out.volume_a.data) CHECK(v >= 0.0f);
    for (const float v : out.volume_b.data) CHECK(v >= 0.0f);
    const Volume refused = fuse(out.volume_a, out.volume_b);
    CHECK(refused.data == out.fused.data);
    CHECK(out.bg_used == estimate_background(ts.lf));
    // encoder params + two decoders of four conv layers each
    CHECK(out.weights.size() == 2 * 1 + 2 * 8);
}

TEST_CASE("bg override is honored") {
    const TinyScene ts;
    V2vConfig cfg = ts.cfg();
    cfg.bg_override = 0.125;
    cfg.steps = 1;
    const TrainOutput out = train(ts.lf, ts.psf, cfg, Precision::F64);
    CHECK(out.bg_used == 0.125);
}

TEST_CASE("same seed twice is bit-identical") {
    ThreadPool::instance().set_thread_count(1);
    const TinyScene ts;
    const TrainOutput r1 = train(ts.lf, ts.psf, ts.cfg());
    const TrainOutput r2 = train(ts.lf, ts.psf, ts.cfg());
    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(r1.log[i].total == r2.log[i].total);
        CHECK(r1.log[i].mse == r2.log[i].mse);
        CHECK(r1.log[i].fft == r2.log[i].fft);
        CHECK(r1.log[i].dc == r2.log[i].dc);
    }
    CHECK(r1.fused.data == r2.fused.data);
    REQUIRE(r1.weights.size() == r2.weights.size());
    for (std::size_t i = 0; i < r1.weights.size(); ++i) {
        CHECK(r1.weights[i].name == r2.weights[i].name);
        CHECK(r1.weights[i].data == r2.weights[i].data);
    }

    V2vConfig other = ts.cfg();
    other.seed = 12;
    const TrainOutput r3 = train(ts.lf, ts.psf, other);
    CHECK(r1.log.back().total != r3.log.back().total);
}

TEST_CASE("ablation flags run and are wired through") {
    const TinyScene ts;
    V2vConfig cfg = ts.cfg();
    cfg.steps = 1;
    cfg.disable_split = true;
    CHECK_NOTHROW(train(ts.lf, ts.psf, cfg));
    cfg = ts.cfg();
    cfg.steps = 1;
    cfg.disable_align = true;
    CHECK_NOTHROW(train(ts.lf, ts.psf, cfg));
}

TEST_CASE("non-finite loss aborts with a numeric error") {
    TinyScene ts;
    ts.lf.data[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(train(ts.lf, ts.psf, ts.cfg(), Precision::F32), NumericError);
}

TEST_CASE("odd view dimensions are rejected") {
    const PsfStack psf = tiny_psf(3, 3, 2);
    Rng rng(422);
    const LightField lf = random_lf(rng, 3, 7, 8);
    V2vConfig cfg;
    cfg.steps = 1;
    CHECK_THROWS_AS(train(lf, psf, cfg), ShapeError);
}

TEST_CASE("view count mismatch with the psf is rejected") {
    const PsfStack psf = tiny_psf(3, 3, 2);
    Rng rng(423);
    const LightField lf = random_lf(rng, 4, 8, 8);
    V2vConfig cfg;
    cfg.steps = 1;
    CHECK_THROWS_AS(train(lf, psf, cfg), ShapeError);
}

} // TEST_SUITE
