#include "v2v3d/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "v2v3d/errors.hpp"
#include "v2v3d/parallel.hpp"

namespace v2v3d {

namespace {

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::array<double, kWin * kWin> gaussian_window() {
    std::array<double, kWin * kWin> w{};
    const int h = kWin / 2;
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x) {
            const double dx = x - h, dy = y - h;
            const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * kWinSigma * kWinSigma));
            w[y * kWin + x] = g;
            sum += g;
        }
    for (double& g : w) g /= sum;
    return w;
}

double mse(const Volume& a, const Volume& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

void check_same_shape(const Volume& a, const Volume& b, const char* who) {
    if (a.nx != b.nx || a.ny != b.ny || a.nz != b.nz)
        throw ShapeError(std::string(who) + ": volume shapes differ");
}

} // namespace

Volume prepare(const Volume& v, double bg) {
    Volume out(v.nx, v.ny, v.nz);
    for (std::size_t i = 0; i < v.data.size(); ++i)
        out.data[i] = static_cast<float>(std::max(0.0, static_cast<double>(v.data[i]) - bg));
    return out;
}

double psnr(const Volume& a, const Volume& b, double peak) {
    check_same_shape(a, b, "psnr");
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double ssim_plane(const float* a, const float* b, int nx, int ny, double dynamic_range) {
    if (nx < kWin || ny < kWin)
        throw ShapeError("ssim: plane smaller than the 11x11 window");
    static const std::array<double, kWin * kWin> win = gaussian_window();
    const double c1 = (kK1 * dynamic_range) * (kK1 * dynamic_range);
    const double c2 = (kK2 * dynamic_range) * (kK2 * dynamic_range);
    double total = 0.0;
    const int wx_n = nx - kWin + 1, wy_n = ny - kWin + 1;
    for (int wy = 0; wy < wy_n; ++wy)
        for (int wx = 0; wx < wx_n; ++wx) {
            double ma = 0.0, mb = 0.0, maa = 0.0, mbb = 0.0, mab = 0.0;
            for (int y = 0; y < kWin; ++y) {
                const float* ra = a + static_cast<std::size_t>(wy + y) * nx + wx;
                const float* rb = b + static_cast<std::size_t>(wy + y) * nx + wx;
                for (int x = 0; x < kWin; ++x) {
                    const double w = win[y * kWin + x];
                    const double va = ra[x], vb = rb[x];
                    ma += w * va;
                    mb += w * vb;
                    maa += w * (va * va);
                    mbb += w * (vb * vb);
                    // parenthesized so ssim(a,b) == ssim(b,a) bit-exactly
                    mab += w * (va * vb);
                }
            }
            const double va = maa - ma * ma;
            const double vb = mbb - mb * mb;
            const double cov = mab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    return total / (static_cast<double>(wx_n) * wy_n);
}

double ssim(const Volume& a, const Volume& b, double dynamic_range) {
    check_same_shape(a, b, "ssim");
    std::vector<double> per_slice(static_cast<std::size_t>(a.nz));
    parallel_for(a.nz, [&](std::int64_t zb, std::int64_t ze) {
        for (std::int64_t z = zb; z < ze; ++z)
            per_slice[static_cast<std::size_t>(z)] =
                ssim_plane(a.slice(static_cast<int>(z)), b.slice(static_cast<int>(z)), a.nx, a.ny,
                           dynamic_range);
    });
    double total = 0.0;
    for (const double s : per_slice) total += s;
    return total / static_cast<double>(a.nz);
}

double ssim_mip(const Volume& a, const Volume& b, double dynamic_range) {
    check_same_shape(a, b, "ssim_mip");
    const std::size_t plane = static_cast<std::size_t>(a.nx) * a.ny;
    std::vector<float> pa(a.slice(0), a.slice(0) + plane), pb(b.slice(0), b.slice(0) + plane);
    for (int z = 1; z < a.nz; ++z) {
        const float* sa = a.slice(z);
        const float* sb = b.slice(z);
        for (std::size_t i = 0; i < plane; ++i) {
            pa[i] = std::max(pa[i], sa[i]);
            pb[i] = std::max(pb[i], sb[i]);
        }
    }
    return ssim_plane(pa.data(), pb.data(), a.nx, a.ny, dynamic_range);
}

MetricReport evaluate(const Volume& recon, const Volume& ground_truth, double bg) {
    check_same_shape(recon, ground_truth, "evaluate");
    const Volume pr = prepare(recon, bg);
    const Volume pg = prepare(ground_truth, bg);
    double peak = 0.0;
    for (const float x : pg.data) peak = std::max(peak, static_cast<double>(x));
    if (peak == 0.0)
        throw DataError("evaluate: prepared ground truth is identically zero; metrics undefined");
    MetricReport rep;
    rep.bg_used = bg;
    rep.psnr = psnr(pr, pg, peak);
    rep.ssim = ssim(pr, pg, peak);
    rep.ssim_mip = ssim_mip(pr, pg, peak);
    return rep;
}

} // namespace v2v3d
