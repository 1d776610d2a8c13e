#pragma once

#include <complex>
#include <vector>

namespace v2v3d::nn {

// Unnormalized 2D DFT of a real h-by-w image (row-major):
//   X[fy,fx] = sum_{y,x} img[y,x] * exp(-2*pi*i*(fy*y/h + fx*x/w))
// Always computed in double; power-of-two sides use an iterative radix-2
// FFT, everything else the direct sum.
std::vector<std::complex<double>> dft2(const double* img, int h, int w);
std::vector<std::complex<double>> dft2(const float* img, int h, int w);

// Unnormalized inverse (positive exponent, no 1/(h*w) factor), so
// idft2_unnormalized(dft2(x)) = h*w*x.
std::vector<std::complex<double>> idft2_unnormalized(const std::complex<double>* spec, int h, int w);

// In-place 1D transform of length n; sign -1 = forward, +1 = inverse
// (unnormalized). Exposed for tests.
void dft1(std::complex<double>* buf, int n, int sign);

} // namespace v2v3d::nn
