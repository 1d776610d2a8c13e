#pragma once

#include <cmath>
#include <complex>
#include <memory>

#include "v2v3d/nn/dft.hpp"
#include "v2v3d/nn/ops.hpp"
#include "v2v3d/optics.hpp"
#include "v2v3d/types.hpp"

// Graph ops specific to the two-branch model: the physics projection, the
// centroid alignment merge, and the three loss terms.

namespace v2v3d {

enum class FftMode { L2, L1 };

namespace graph {

using nn::Node;
using nn::NodePtr;
using nn::Shape;
using nn::make_node;

// Differentiable forward projection of a volume tensor [nz,h,w] onto the
// listed views: out [n_views,h,w]. The backward rule is the adjoint
// back-projection, so gradients are exact by construction.
template <typename T>
NodePtr<T> project_views(const NodePtr<T>& vol, std::shared_ptr<const std::vector<T>> psf, int k,
                         int psf_nz, int psf_nu, std::vector<int> views) {
    if (vol->shape.rank != 3) throw ShapeError("project_views: volume must be [nz,h,w]");
    const int nz = vol->shape[0], h = vol->shape[1], w = vol->shape[2];
    if (nz != psf_nz)
        throw ShapeError("project_views: volume has " + std::to_string(nz) + " planes, psf has " +
                         std::to_string(psf_nz));
    for (const int u : views)
        if (u < 0 || u >= psf_nu) throw ShapeError("project_views: view index out of range");
    const int nv = static_cast<int>(views.size());
    auto out = make_node<T>(Shape::of({nv, h, w}));
    out->parents = {vol};
    out->needs_grad = vol->needs_grad;
    kernels::forward_project_views(vol->value.data(), w, h, nz, psf->data(), k, psf_nz,
                                   views.data(), nv, out->value.data());
    if (out->needs_grad) {
        Node<T>* vp = vol.get();
        out->backward_fn = [vp, psf, k, nz, h, w, views = std::move(views)](Node<T>& self) {
            std::vector<T> tmp(vp->value.size());
            kernels::back_project_views(self.grad.data(), w, h, psf->data(), k, nz, views.data(),
                                        static_cast<int>(views.size()), tmp.data());
            for (std::size_t i = 0; i < tmp.size(); ++i) vp->grad[i] += tmp[i];
        };
    }
    return out;
}

// Merge per-view feature planes [nc,h,w] into a depth-major channel stack
// [nz*nc,h,w]: channel z*nc+c = mean over views of F(view,c) translated by
// the negated centroid offset for (view,z). `offsets` is indexed
// [view_position * nz + z] and must match `features` in view order.
template <typename T>
NodePtr<T> align_merge(const std::vector<NodePtr<T>>& features,
                       std::vector<std::array<int, 2>> offsets, int nz) {
    if (features.empty()) throw ShapeError("align_merge: no feature views");
    const int nc = features[0]->shape[0], h = features[0]->shape[1], w = features[0]->shape[2];
    for (const auto& f : features)
        if (f->shape != features[0]->shape)
            throw ShapeError("align_merge: feature shapes differ");
    const int nu = static_cast<int>(features.size());
    if (offsets.size() != static_cast<std::size_t>(nu) * nz)
        throw ShapeError("align_merge: offset table size mismatch");

    auto out = make_node<T>(Shape::of({nz * nc, h, w}));
    out->parents = features;
    out->needs_grad = nn::detail::any_needs_grad(features);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double inv_nu = 1.0 / static_cast<double>(nu);
    {
        std::vector<double> acc(plane);
        for (int z = 0; z < nz; ++z)
            for (int c = 0; c < nc; ++c) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int v = 0; v < nu; ++v) {
                    const auto d = offsets[static_cast<std::size_t>(v) * nz + z];
                    kernels::add_shifted(acc.data(), features[static_cast<std::size_t>(v)]->value.data() +
                                                         plane * static_cast<std::size_t>(c),
                                         w, h, d[0], d[1], inv_nu);
                }
                T* dst = out->value.data() + plane * (static_cast<std::size_t>(z) * nc + c);
                for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(acc[i]);
            }
    }
    if (out->needs_grad) {
        out->backward_fn = [offsets = std::move(offsets), nz, nc, h, w, plane, inv_nu](Node<T>& self) {
            const int nu = static_cast<int>(self.parents.size());
            std::vector<double> acc(plane);
            for (int v = 0; v < nu; ++v) {
                auto& parent = *self.parents[static_cast<std::size_t>(v)];
                if (!parent.needs_grad) continue;
                for (int c = 0; c < nc; ++c) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int z = 0; z < nz; ++z) {
                        const auto d = offsets[static_cast<std::size_t>(v) * nz + z];
                        kernels::add_shifted(acc.data(), self.grad.data() +
                                                             plane * (static_cast<std::size_t>(z) * nc + c),
                                             w, h, -d[0], -d[1], inv_nu);
                    }
                    T* dst = parent.grad.data() + plane * static_cast<std::size_t>(c);
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += static_cast<T>(acc[i]);
                }
            }
        };
    }
    return out;
}

// Mean squared error over all elements -> scalar node.
template <typename T>
NodePtr<T> mse_loss(const NodePtr<T>& a, const NodePtr<T>& b) {
    if (a->shape != b->shape)
        throw ShapeError("mse_loss: shape " + a->shape.str() + " vs " + b->shape.str());
    auto out = make_node<T>(Shape::of({1}));
    out->parents = {a, b};
    out->needs_grad = a->needs_grad || b->needs_grad;
    const std::size_t n = a->value.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a->value[i]) - static_cast<double>(b->value[i]);
        acc += d * d;
    }
    out->value[0] = static_cast<T>(acc / static_cast<double>(n));
    if (out->needs_grad) {
        Node<T>* ap = a.get();
        Node<T>* bp = b.get();
        out->backward_fn = [ap, bp, n](Node<T>& self) {
            const double g = static_cast<double>(self.grad[0]) * 2.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double d = (static_cast<double>(ap->value[i]) - static_cast<double>(bp->value[i])) * g;
                if (ap->needs_grad) ap->grad[i] += static_cast<T>(d);
                if (bp->needs_grad) bp->grad[i] -= static_cast<T>(d);
            }
        };
    }
    return out;
}

// Frequency-domain loss over stacked view images [nv,h,w]. L2 is the
// literal squared spectrum distance per view, divided by the per-view pixel
// count and averaged over views (Parseval makes it m x MSE); L1 uses the
// complex modulus. Spectra are cached for the backward pass, which is an
// inverse transform of the (normalized) spectrum difference.
template <typename T>
NodePtr<T> fft_loss(const NodePtr<T>& a, const NodePtr<T>& b, FftMode mode) {
    if (a->shape != b->shape)
        throw ShapeError("fft_loss: shape " + a->shape.str() + " vs " + b->shape.str());
    if (a->shape.rank != 3) throw ShapeError("fft_loss: inputs must be [views,h,w]");
    const int nv = a->shape[0], h = a->shape[1], w = a->shape[2];
    const std::size_t m = static_cast<std::size_t>(h) * w;
    auto out = make_node<T>(Shape::of({1}));
    out->parents = {a, b};
    out->needs_grad = a->needs_grad || b->needs_grad;

    auto diffs = std::make_shared<std::vector<std::vector<std::complex<double>>>>();
    diffs->reserve(static_cast<std::size_t>(nv));
    double total = 0.0;
    for (int v = 0; v < nv; ++v) {
        const auto sa = nn::dft2(a->value.data() + m * v, h, w);
        const auto sb = nn::dft2(b->value.data() + m * v, h, w);
        std::vector<std::complex<double>> d(m);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            d[i] = sa[i] - sb[i];
            acc += mode == FftMode::L2 ? std::norm(d[i]) : std::abs(d[i]);
        }
        total += acc / static_cast<double>(m);
        diffs->push_back(std::move(d));
    }
    out->value[0] = static_cast<T>(total / static_cast<double>(nv));

    if (out->needs_grad) {
        Node<T>* ap = a.get();
        Node<T>* bp = b.get();
        out->backward_fn = [ap, bp, diffs, mode, nv, h, w, m](Node<T>& self) {
            const double g = static_cast<double>(self.grad[0]) / (static_cast<double>(m) * nv);
            for (int v = 0; v < nv; ++v) {
                std::vector<std::complex<double>>& d = (*diffs)[static_cast<std::size_t>(v)];
                if (mode == FftMode::L2) {
                    // dL/da = (2/m) Re(IDFT(D)) per view
                    const auto inv = nn::idft2_unnormalized(d.data(), h, w);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double gi = 2.0 * g * inv[i].real();
                        if (ap->needs_grad) ap->grad[m * v + i] += static_cast<T>(gi);
                        if (bp->needs_grad) bp->grad[m * v + i] -= static_cast<T>(gi);
                    }
                } else {
                    // dL/da = (1/m) Re(IDFT(D/|D|)), subgradient 0 at D = 0
                    for (std::size_t i = 0; i < m; ++i) {
                        const double mag = std::abs(d[i]);
                        d[i] = mag > 0.0 ? d[i] / mag : std::complex<double>(0.0, 0.0);
                    }
                    const auto inv = nn::idft2_unnormalized(d.data(), h, w);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double gi = g * inv[i].real();
                        if (ap->needs_grad) ap->grad[m * v + i] += static_cast<T>(gi);
                        if (bp->needs_grad) bp->grad[m * v + i] -= static_cast<T>(gi);
                    }
                }
            }
        };
    }
    return out;
}

// De-crosstalk penalty: sum over voxels of max(0, bg - v). Subgradient 0 at
// the kink.
template <typename T>
NodePtr<T> dc_loss(const NodePtr<T>& vol, double bg) {
    auto out = make_node<T>(Shape::of({1}));
    out->parents = {vol};
    out->needs_grad = vol->needs_grad;
    double acc = 0.0;
    for (const T v : vol->value) {
        const double d = bg - static_cast<double>(v);
        if (d > 0.0) acc += d;
    }
    out->value[0] = static_cast<T>(acc);
    if (out->needs_grad) {
        Node<T>* vp = vol.get();
        out->backward_fn = [vp, bg](Node<T>& self) {
            const T g = self.grad[0];
            for (std::size_t i = 0; i < vp->value.size(); ++i)
                if (static_cast<double>(vp->value[i]) < bg) vp->grad[i] -= g;
        };
    }
    return out;
}

} // namespace graph
} // namespace v2v3d
