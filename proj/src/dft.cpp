#include "v2v3d/nn/dft.hpp"

#include <cmath>
#include <numbers>

namespace v2v3d::nn {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey with bit-reversal permutation.
void fft_pow2(std::complex<double>* a, int n, int sign) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

void dft_naive(std::complex<double>* a, int n, int sign) {
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f) {
        std::complex<double> acc(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * std::numbers::pi * f * t / n;
            acc += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[static_cast<std::size_t>(f)] = acc;
    }
    for (int i = 0; i < n; ++i) a[i] = out[static_cast<std::size_t>(i)];
}

// Row-column decomposition over a complex buffer.
void transform2(std::complex<double>* buf, int h, int w, int sign) {
    for (int y = 0; y < h; ++y) dft1(buf + static_cast<std::size_t>(y) * w, w, sign);
    std::vector<std::complex<double>> col(static_cast<std::size_t>(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[static_cast<std::size_t>(y)] = buf[static_cast<std::size_t>(y) * w + x];
        dft1(col.data(), h, sign);
        for (int y = 0; y < h; ++y) buf[static_cast<std::size_t>(y) * w + x] = col[static_cast<std::size_t>(y)];
    }
}

} // namespace

void dft1(std::complex<double>* buf, int n, int sign) {
    if (n == 1) return;
    if (is_pow2(n))
        fft_pow2(buf, n, sign);
    else
        dft_naive(buf, n, sign);
}

std::vector<std::complex<double>> dft2(const double* img, int h, int w) {
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = std::complex<double>(img[i], 0.0);
    transform2(buf.data(), h, w, -1);
    return buf;
}

std::vector<std::complex<double>> dft2(const float* img, int h, int w) {
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = std::complex<double>(static_cast<double>(img[i]), 0.0);
    transform2(buf.data(), h, w, -1);
    return buf;
}

std::vector<std::complex<double>> idft2_unnormalized(const std::complex<double>* spec, int h, int w) {
    std::vector<std::complex<double>> buf(spec, spec + static_cast<std::size_t>(h) * w);
    transform2(buf.data(), h, w, +1);
    return buf;
}

} // namespace v2v3d::nn
