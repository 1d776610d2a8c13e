#pragma once

#include "v2v3d/nn/graph.hpp"
#include "v2v3d/parallel.hpp"

namespace v2v3d::nn {

namespace detail {

template <typename T>
bool any_needs_grad(const std::vector<NodePtr<T>>& parents) {
    for (const auto& p : parents)
        if (p->needs_grad) return true;
    return false;
}

// Add a double-precision accumulation buffer into a grad vector.
template <typename T>
void add_acc(std::vector<T>& grad, const std::vector<double>& acc) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += static_cast<T>(acc[i]);
}

// One output row of a 3x3 correlation, accumulated into acc: for each tap,
// acc[x] += w9[ky*3+kx] * plane(y + s*(ky-1), x + s*(kx-1)), zero padded.
// s=+1 is the forward orientation, s=-1 the transposed one (input gradient).
// A single fused pass touches the accumulator row once per channel instead of
// once per tap; per element the taps still apply in (ky,kx) order, so the
// result is bit-identical to the generic multi-pass loop. Requires wd >= 2.
template <typename T>
void corr3_row_acc(double* acc, const T* plane, const T* w9, int y, int h, int wd, int s) {
    const int yt = y - s, yb = y + s;
    if (yt >= 0 && yt < h && yb >= 0 && yb < h) {
        const T* r0 = plane + static_cast<std::size_t>(yt) * wd;
        const T* r1 = plane + static_cast<std::size_t>(y) * wd;
        const T* r2 = plane + static_cast<std::size_t>(yb) * wd;
        const double w00 = w9[0], w01 = w9[1], w02 = w9[2];
        const double w10 = w9[3], w11 = w9[4], w12 = w9[5];
        const double w20 = w9[6], w21 = w9[7], w22 = w9[8];
        const int L = -s, R = s;
        for (int x = 1; x < wd - 1; ++x) {
            double a = acc[x];
            a += w00 * static_cast<double>(r0[x + L]);
            a += w01 * static_cast<double>(r0[x]);
            a += w02 * static_cast<double>(r0[x + R]);
            a += w10 * static_cast<double>(r1[x + L]);
            a += w11 * static_cast<double>(r1[x]);
            a += w12 * static_cast<double>(r1[x + R]);
            a += w20 * static_cast<double>(r2[x + L]);
            a += w21 * static_cast<double>(r2[x]);
            a += w22 * static_cast<double>(r2[x + R]);
            acc[x] = a;
        }
        const T* rows[3] = {r0, r1, r2};
        for (const int x : {0, wd - 1})
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int xs = x + s * (kx - 1);
                    if (xs >= 0 && xs < wd)
                        acc[x] += static_cast<double>(w9[ky * 3 + kx]) *
                                  static_cast<double>(rows[ky][xs]);
                }
        return;
    }
    for (int ky = 0; ky < 3; ++ky) {
        const int yy = y + s * (ky - 1);
        if (yy < 0 || yy >= h) continue;
        const T* row = plane + static_cast<std::size_t>(yy) * wd;
        for (int kx = 0; kx < 3; ++kx) {
            const double wgt = static_cast<double>(w9[ky * 3 + kx]);
            const int shift = s * (kx - 1);
            const int x0 = std::max(0, -shift);
            const int x1 = std::min(wd, wd - shift);
            for (int xx = x0; xx < x1; ++xx)
                acc[xx] += wgt * static_cast<double>(row[xx + shift]);
        }
    }
}

// Four correlation lanes sharing one set of input rows: lane j accumulates
// into acc + j*acc_stride using weights w9 + j*w_stride. The row loads and
// float->double converts are amortized over the four lanes; per lane the tap
// order matches corr3_row_acc, so results are bit-identical to four single
// calls. Requires wd >= 2.
template <typename T>
void corr3_row_acc4(double* acc, std::size_t acc_stride, const T* plane, const T* w9,
                    std::size_t w_stride, int y, int h, int wd, int s) {
    const int yt = y - s, yb = y + s;
    if (yt < 0 || yt >= h || yb < 0 || yb >= h) {
        for (int j = 0; j < 4; ++j)
            corr3_row_acc(acc + j * acc_stride, plane, w9 + j * w_stride, y, h, wd, s);
        return;
    }
    const T* r0 = plane + static_cast<std::size_t>(yt) * wd;
    const T* r1 = plane + static_cast<std::size_t>(y) * wd;
    const T* r2 = plane + static_cast<std::size_t>(yb) * wd;
    const int L = -s, R = s;
    double w[4][9];
    for (int j = 0; j < 4; ++j)
        for (int t = 0; t < 9; ++t) w[j][t] = static_cast<double>(w9[j * w_stride + t]);
    double* a0 = acc;
    double* a1 = acc + acc_stride;
    double* a2 = acc + 2 * acc_stride;
    double* a3 = acc + 3 * acc_stride;
    for (int x = 1; x < wd - 1; ++x) {
        const double v0 = static_cast<double>(r0[x + L]);
        const double v1 = static_cast<double>(r0[x]);
        const double v2 = static_cast<double>(r0[x + R]);
        const double v3 = static_cast<double>(r1[x + L]);
        const double v4 = static_cast<double>(r1[x]);
        const double v5 = static_cast<double>(r1[x + R]);
        const double v6 = static_cast<double>(r2[x + L]);
        const double v7 = static_cast<double>(r2[x]);
        const double v8 = static_cast<double>(r2[x + R]);
        double t0 = a0[x];
        t0 += w[0][0] * v0; t0 += w[0][1] * v1; t0 += w[0][2] * v2;
        t0 += w[0][3] * v3; t0 += w[0][4] * v4; t0 += w[0][5] * v5;
        t0 += w[0][6] * v6; t0 += w[0][7] * v7; t0 += w[0][8] * v8;
        a0[x] = t0;
        double t1 = a1[x];
        t1 += w[1][0] * v0; t1 += w[1][1] * v1; t1 += w[1][2] * v2;
        t1 += w[1][3] * v3; t1 += w[1][4] * v4; t1 += w[1][5] * v5;
        t1 += w[1][6] * v6; t1 += w[1][7] * v7; t1 += w[1][8] * v8;
        a1[x] = t1;
        double t2 = a2[x];
        t2 += w[2][0] * v0; t2 += w[2][1] * v1; t2 += w[2][2] * v2;
        t2 += w[2][3] * v3; t2 += w[2][4] * v4; t2 += w[2][5] * v5;
        t2 += w[2][6] * v6; t2 += w[2][7] * v7; t2 += w[2][8] * v8;
        a2[x] = t2;
        double t3 = a3[x];
        t3 += w[3][0] * v0; t3 += w[3][1] * v1; t3 += w[3][2] * v2;
        t3 += w[3][3] * v3; t3 += w[3][4] * v4; t3 += w[3][5] * v5;
        t3 += w[3][6] * v6; t3 += w[3][7] * v7; t3 += w[3][8] * v8;
        a3[x] = t3;
    }
    const T* rows[3] = {r0, r1, r2};
    for (int j = 0; j < 4; ++j)
        for (const int x : {0, wd - 1})
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int xs = x + s * (kx - 1);
                    if (xs >= 0 && xs < wd)
                        acc[j * acc_stride + x] +=
                            w[j][ky * 3 + kx] * static_cast<double>(rows[ky][xs]);
                }
}

// All nine 3x3 weight-gradient taps in one pass over the gradient plane:
// gwk[ky*3+kx] += sum_{y,x} g(y,x) * x(y+ky-1, x+kx-1). Each tap accumulates
// in eight double lanes folded in a fixed order at the end, which keeps the
// reduction 64-bit, vectorizable, and deterministic (the summation order is
// fixed but differs from a naive scan). Requires wd >= 2.
template <typename T>
void corr3_wgrad(T* gwk, const T* g, const T* xq, int h, int wd) {
    double lane[9][8] = {};
    double edge[9] = {}; // border pixels and scalar remainders
    for (int y = 0; y < h; ++y) {
        const T* grow = g + static_cast<std::size_t>(y) * wd;
        const T* r1 = xq + static_cast<std::size_t>(y) * wd;
        if (y >= 1 && y + 1 < h) {
            const T* r0 = r1 - wd;
            const T* r2 = r1 + wd;
            {
                const double gg = static_cast<double>(grow[0]);
                edge[1] += gg * static_cast<double>(r0[0]);
                edge[2] += gg * static_cast<double>(r0[1]);
                edge[4] += gg * static_cast<double>(r1[0]);
                edge[5] += gg * static_cast<double>(r1[1]);
                edge[7] += gg * static_cast<double>(r2[0]);
                edge[8] += gg * static_cast<double>(r2[1]);
            }
            int x = 1;
            for (; x + 8 <= wd - 1; x += 8)
                for (int j = 0; j < 8; ++j) {
                    const double gg = static_cast<double>(grow[x + j]);
                    lane[0][j] += gg * static_cast<double>(r0[x + j - 1]);
                    lane[1][j] += gg * static_cast<double>(r0[x + j]);
                    lane[2][j] += gg * static_cast<double>(r0[x + j + 1]);
                    lane[3][j] += gg * static_cast<double>(r1[x + j - 1]);
                    lane[4][j] += gg * static_cast<double>(r1[x + j]);
                    lane[5][j] += gg * static_cast<double>(r1[x + j + 1]);
                    lane[6][j] += gg * static_cast<double>(r2[x + j - 1]);
                    lane[7][j] += gg * static_cast<double>(r2[x + j]);
                    lane[8][j] += gg * static_cast<double>(r2[x + j + 1]);
                }
            for (; x < wd - 1; ++x) {
                const double gg = static_cast<double>(grow[x]);
                edge[0] += gg * static_cast<double>(r0[x - 1]);
                edge[1] += gg * static_cast<double>(r0[x]);
                edge[2] += gg * static_cast<double>(r0[x + 1]);
                edge[3] += gg * static_cast<double>(r1[x - 1]);
                edge[4] += gg * static_cast<double>(r1[x]);
                edge[5] += gg * static_cast<double>(r1[x + 1]);
                edge[6] += gg * static_cast<double>(r2[x - 1]);
                edge[7] += gg * static_cast<double>(r2[x]);
                edge[8] += gg * static_cast<double>(r2[x + 1]);
            }
            {
                const double gg = static_cast<double>(grow[wd - 1]);
                edge[0] += gg * static_cast<double>(r0[wd - 2]);
                edge[1] += gg * static_cast<double>(r0[wd - 1]);
                edge[3] += gg * static_cast<double>(r1[wd - 2]);
                edge[4] += gg * static_cast<double>(r1[wd - 1]);
                edge[6] += gg * static_cast<double>(r2[wd - 2]);
                edge[7] += gg * static_cast<double>(r2[wd - 1]);
            }
            continue;
        }
        for (int ky = 0; ky < 3; ++ky) {
            const int yy = y + ky - 1;
            if (yy < 0 || yy >= h) continue;
            const T* xrow = xq + static_cast<std::size_t>(yy) * wd;
            for (int x = 0; x < wd; ++x) {
                const double gg = static_cast<double>(grow[x]);
                if (x >= 1) edge[ky * 3 + 0] += gg * static_cast<double>(xrow[x - 1]);
                edge[ky * 3 + 1] += gg * static_cast<double>(xrow[x]);
                if (x + 1 < wd) edge[ky * 3 + 2] += gg * static_cast<double>(xrow[x + 1]);
            }
        }
    }
    for (int t = 0; t < 9; ++t) {
        double acc = edge[t];
        for (int j = 0; j < 8; ++j) acc += lane[t][j];
        gwk[t] += static_cast<T>(acc);
    }
}

} // namespace detail

// 2D convolution in the NN orientation (cross-correlation), zero "same"
// padding, odd kernel. x: [ci,h,w], w: [co,ci,k,k], b: [co] or nullptr.
// Note the orientation differs from the optics operator on purpose.
template <typename T>
NodePtr<T> conv2d(const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b) {
    if (x->shape.rank != 3) throw ShapeError("conv2d: input must be [c,h,w], got " + x->shape.str());
    if (w->shape.rank != 4) throw ShapeError("conv2d: weights must be [co,ci,k,k], got " + w->shape.str());
    const int ci = x->shape[0], h = x->shape[1], wd = x->shape[2];
    const int co = w->shape[0], k = w->shape[2];
    if (w->shape[1] != ci)
        throw ShapeError("conv2d: weight ci " + std::to_string(w->shape[1]) + " vs input c " + std::to_string(ci));
    if (w->shape[3] != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square with odd side");
    if (b && (b->shape.rank != 1 || b->shape[0] != co))
        throw ShapeError("conv2d: bias must be [co]");

    auto out = make_node<T>(Shape::of({co, h, wd}));
    out->parents = b ? std::vector<NodePtr<T>>{x, w, b} : std::vector<NodePtr<T>>{x, w};
    out->needs_grad = detail::any_needs_grad(out->parents);

    const int hk = (k - 1) / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    const T* xv = x->value.data();
    const T* wv = w->value.data();
    const T* bv = b ? b->value.data() : nullptr;
    T* ov = out->value.data();
    if (k == 3 && wd >= 2) {
        // fast path: all output channels of one row at a time, with each input
        // channel's rows loaded once and shared across 4-channel lane blocks.
        // Per element the accumulation order (ic-major, taps row-major) equals
        // the generic path, so both produce identical roundings.
        parallel_for(h, [&](std::int64_t yb, std::int64_t ye) {
            std::vector<double> acc(static_cast<std::size_t>(co) * wd);
            for (std::int64_t y = yb; y < ye; ++y) {
                for (int oc = 0; oc < co; ++oc)
                    std::fill(acc.begin() + static_cast<std::ptrdiff_t>(oc) * wd,
                              acc.begin() + static_cast<std::ptrdiff_t>(oc + 1) * wd,
                              bv ? static_cast<double>(bv[oc]) : 0.0);
                for (int ic = 0; ic < ci; ++ic) {
                    const T* xp = xv + plane * ic;
                    int oc = 0;
                    for (; oc + 4 <= co; oc += 4)
                        detail::corr3_row_acc4(acc.data() + static_cast<std::size_t>(oc) * wd,
                                               static_cast<std::size_t>(wd), xp,
                                               wv + (static_cast<std::size_t>(oc) * ci + ic) * 9,
                                               static_cast<std::size_t>(ci) * 9,
                                               static_cast<int>(y), h, wd, +1);
                    for (; oc < co; ++oc)
                        detail::corr3_row_acc(acc.data() + static_cast<std::size_t>(oc) * wd, xp,
                                              wv + (static_cast<std::size_t>(oc) * ci + ic) * 9,
                                              static_cast<int>(y), h, wd, +1);
                }
                for (int oc = 0; oc < co; ++oc) {
                    T* orow = ov + plane * oc + static_cast<std::size_t>(y) * wd;
                    const double* arow = acc.data() + static_cast<std::size_t>(oc) * wd;
                    for (int xx = 0; xx < wd; ++xx) orow[xx] = static_cast<T>(arow[xx]);
                }
            }
        });
    } else {
        parallel_for(static_cast<std::int64_t>(co) * h, [&](std::int64_t rb, std::int64_t re) {
            std::vector<double> acc(static_cast<std::size_t>(wd));
            for (std::int64_t r = rb; r < re; ++r) {
                const int oc = static_cast<int>(r / h);
                const int y = static_cast<int>(r % h);
                std::fill(acc.begin(), acc.end(), bv ? static_cast<double>(bv[oc]) : 0.0);
                for (int ic = 0; ic < ci; ++ic) {
                    const T* xp = xv + plane * ic;
                    const T* wp = wv + (static_cast<std::size_t>(oc) * ci + ic) * k * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const int yy = y + ky - hk;
                        if (yy < 0 || yy >= h) continue;
                        const T* row = xp + static_cast<std::size_t>(yy) * wd;
                        for (int kx = 0; kx < k; ++kx) {
                            const double wgt = static_cast<double>(wp[ky * k + kx]);
                            const int shift = kx - hk;
                            const int x0 = std::max(0, -shift);
                            const int x1 = std::min(wd, wd - shift);
                            for (int xx = x0; xx < x1; ++xx) acc[xx] += wgt * static_cast<double>(row[xx + shift]);
                        }
                    }
                }
                T* orow = ov + plane * oc + static_cast<std::size_t>(y) * wd;
                for (int xx = 0; xx < wd; ++xx) orow[xx] = static_cast<T>(acc[xx]);
            }
        });
    }

    if (out->needs_grad) {
        Node<T>* xp = x.get();
        Node<T>* wp = w.get();
        Node<T>* bp = b ? b.get() : nullptr;
        out->backward_fn = [xp, wp, bp, ci, co, h, wd, k, hk, plane](Node<T>& self) {
            const T* g = self.grad.data();
            if (xp->needs_grad) {
                // grad_x = correlation of g with the weights flipped in
                // (ky,kx), summed over co: transpose of the forward map.
                T* gx = xp->grad.data();
                const T* wv = wp->value.data();
                if (k == 3 && wd >= 2) {
                    // fast path: all input channels of one row at a time; each
                    // output-gradient plane's rows are shared across 4-channel
                    // lane blocks (consecutive ic share oc, so the weight
                    // stride between lanes is 9).
                    parallel_for(h, [&](std::int64_t yb, std::int64_t ye) {
                        std::vector<double> acc(static_cast<std::size_t>(ci) * wd);
                        for (std::int64_t yy = yb; yy < ye; ++yy) {
                            std::fill(acc.begin(), acc.end(), 0.0);
                            for (int oc = 0; oc < co; ++oc) {
                                const T* gp = g + plane * oc;
                                const T* wbase = wv + static_cast<std::size_t>(oc) * ci * 9;
                                int ic = 0;
                                for (; ic + 4 <= ci; ic += 4)
                                    detail::corr3_row_acc4(
                                        acc.data() + static_cast<std::size_t>(ic) * wd,
                                        static_cast<std::size_t>(wd), gp,
                                        wbase + static_cast<std::size_t>(ic) * 9, 9,
                                        static_cast<int>(yy), h, wd, -1);
                                for (; ic < ci; ++ic)
                                    detail::corr3_row_acc(
                                        acc.data() + static_cast<std::size_t>(ic) * wd, gp,
                                        wbase + static_cast<std::size_t>(ic) * 9,
                                        static_cast<int>(yy), h, wd, -1);
                            }
                            for (int ic = 0; ic < ci; ++ic) {
                                T* gxr = gx + plane * ic + static_cast<std::size_t>(yy) * wd;
                                const double* arow = acc.data() + static_cast<std::size_t>(ic) * wd;
                                for (int xx = 0; xx < wd; ++xx) gxr[xx] += static_cast<T>(arow[xx]);
                            }
                        }
                    });
                } else {
                    parallel_for(static_cast<std::int64_t>(ci) * h, [&](std::int64_t rb, std::int64_t re) {
                        std::vector<double> row_acc(static_cast<std::size_t>(wd));
                        for (std::int64_t r = rb; r < re; ++r) {
                            const int ic = static_cast<int>(r / h);
                            const int yy = static_cast<int>(r % h);
                            std::fill(row_acc.begin(), row_acc.end(), 0.0);
                            for (int oc = 0; oc < co; ++oc) {
                                const T* gp = g + plane * oc;
                                const T* wk = wv + (static_cast<std::size_t>(oc) * ci + ic) * k * k;
                                for (int ky = 0; ky < k; ++ky) {
                                    const int gy = yy - (ky - hk);
                                    if (gy < 0 || gy >= h) continue;
                                    const T* grow = gp + static_cast<std::size_t>(gy) * wd;
                                    for (int kx = 0; kx < k; ++kx) {
                                        const double wgt = static_cast<double>(wk[ky * k + kx]);
                                        const int shift = kx - hk;
                                        const int x0 = std::max(0, shift);
                                        const int x1 = std::min(wd, wd + shift);
                                        for (int xx = x0; xx < x1; ++xx)
                                            row_acc[xx] += wgt * static_cast<double>(grow[xx - shift]);
                                    }
                                }
                            }
                            T* gxr = gx + plane * ic + static_cast<std::size_t>(yy) * wd;
                            for (int xx = 0; xx < wd; ++xx) gxr[xx] += static_cast<T>(row_acc[xx]);
                        }
                    });
                }
            }
            if (wp->needs_grad) {
                const T* xv = xp->value.data();
                T* gw = wp->grad.data();
                parallel_for(static_cast<std::int64_t>(co) * ci, [&](std::int64_t pb, std::int64_t pe) {
                    for (std::int64_t pr = pb; pr < pe; ++pr) {
                        const int oc = static_cast<int>(pr / ci);
                        const int ic = static_cast<int>(pr % ci);
                        const T* gp = g + plane * oc;
                        const T* xq = xv + plane * ic;
                        T* gwk = gw + (static_cast<std::size_t>(oc) * ci + ic) * k * k;
                        if (k == 3 && wd >= 2) {
                            detail::corr3_wgrad(gwk, gp, xq, h, wd);
                            continue;
                        }
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                double acc = 0.0;
                                const int y0 = std::max(0, hk - ky);
                                const int y1 = std::min(h, h + hk - ky);
                                const int x0 = std::max(0, hk - kx);
                                const int x1 = std::min(wd, wd + hk - kx);
                                for (int y = y0; y < y1; ++y) {
                                    const T* grow = gp + static_cast<std::size_t>(y) * wd;
                                    const T* xrow = xq + static_cast<std::size_t>(y + ky - hk) * wd + (kx - hk);
                                    for (int xx = x0; xx < x1; ++xx)
                                        acc += static_cast<double>(grow[xx]) * static_cast<double>(xrow[xx]);
                                }
                                gwk[ky * k + kx] += static_cast<T>(acc);
                            }
                    }
                });
            }
            if (bp && bp->needs_grad) {
                for (int oc = 0; oc < co; ++oc) {
                    double acc = 0.0;
                    const T* gp = g + plane * oc;
                    for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(gp[i]);
                    bp->grad[static_cast<std::size_t>(oc)] += static_cast<T>(acc);
                }
            }
        };
    }
    return out;
}

template <typename T>
NodePtr<T> relu(const NodePtr<T>& x) {
    auto out = make_node<T>(x->shape);
    out->parents = {x};
    out->needs_grad = x->needs_grad;
    for (std::size_t i = 0; i < x->value.size(); ++i)
        out->value[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    if (out->needs_grad) {
        Node<T>* xp = x.get();
        out->backward_fn = [xp](Node<T>& self) {
            // subgradient at 0 pinned to 0
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (xp->value[i] > T(0)) xp->grad[i] += self.grad[i];
        };
    }
    return out;
}

template <typename T>
NodePtr<T> leaky_relu(const NodePtr<T>& x, double slope = 0.1) {
    auto out = make_node<T>(x->shape);
    out->parents = {x};
    out->needs_grad = x->needs_grad;
    const T s = static_cast<T>(slope);
    for (std::size_t i = 0; i < x->value.size(); ++i)
        out->value[i] = x->value[i] > T(0) ? x->value[i] : s * x->value[i];
    if (out->needs_grad) {
        Node<T>* xp = x.get();
        out->backward_fn = [xp, s](Node<T>& self) {
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                xp->grad[i] += (xp->value[i] > T(0) ? self.grad[i] : s * self.grad[i]);
        };
    }
    return out;
}

// Factor-2 average pooling; spatial dims must be even.
template <typename T>
NodePtr<T> avgpool2(const NodePtr<T>& x) {
    if (x->shape.rank != 3) throw ShapeError("avgpool2: input must be [c,h,w]");
    const int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    if (h % 2 || w % 2) throw ShapeError("avgpool2: spatial dims must be even, got " + x->shape.str());
    auto out = make_node<T>(Shape::of({c, h / 2, w / 2}));
    out->parents = {x};
    out->needs_grad = x->needs_grad;
    const int oh = h / 2, ow = w / 2;
    for (int ic = 0; ic < c; ++ic) {
        const T* xp = x->value.data() + static_cast<std::size_t>(ic) * h * w;
        T* op = out->value.data() + static_cast<std::size_t>(ic) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
                const T* p = xp + static_cast<std::size_t>(2 * y) * w + 2 * xx;
                op[y * ow + xx] = static_cast<T>(
                    0.25 * (static_cast<double>(p[0]) + static_cast<double>(p[1]) +
                            static_cast<double>(p[w]) + static_cast<double>(p[w + 1])));
            }
    }
    if (out->needs_grad) {
        Node<T>* xp = x.get();
        out->backward_fn = [xp, c, h, w, oh, ow](Node<T>& self) {
            for (int ic = 0; ic < c; ++ic) {
                const T* gp = self.grad.data() + static_cast<std::size_t>(ic) * oh * ow;
                T* gx = xp->grad.data() + static_cast<std::size_t>(ic) * h * w;
                for (int y = 0; y < oh; ++y)
                    for (int xx = 0; xx < ow; ++xx) {
                        const T q = static_cast<T>(0.25) * gp[y * ow + xx];
                        T* p = gx + static_cast<std::size_t>(2 * y) * w + 2 * xx;
                        p[0] += q;
                        p[1] += q;
                        p[w] += q;
                        p[w + 1] += q;
                    }
            }
        };
    }
    return out;
}

template <typename T>
NodePtr<T> upsample_nearest2(const NodePtr<T>& x) {
    if (x->shape.rank != 3) throw ShapeError("upsample_nearest2: input must be [c,h,w]");
    const int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    auto out = make_node<T>(Shape::of({c, 2 * h, 2 * w}));
    out->parents = {x};
    out->needs_grad = x->needs_grad;
    const int oh = 2 * h, ow = 2 * w;
    for (int ic = 0; ic < c; ++ic) {
        const T* xp = x->value.data() + static_cast<std::size_t>(ic) * h * w;
        T* op = out->value.data() + static_cast<std::size_t>(ic) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const T* row = xp + static_cast<std::size_t>(y / 2) * w;
            T* orow = op + static_cast<std::size_t>(y) * ow;
            for (int xx = 0; xx < ow; ++xx) orow[xx] = row[xx / 2];
        }
    }
    if (out->needs_grad) {
        Node<T>* xp = x.get();
        out->backward_fn = [xp, c, h, w, oh, ow](Node<T>& self) {
            for (int ic = 0; ic < c; ++ic) {
                const T* gp = self.grad.data() + static_cast<std::size_t>(ic) * oh * ow;
                T* gx = xp->grad.data() + static_cast<std::size_t>(ic) * h * w;
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        const T* p = gp + static_cast<std::size_t>(2 * y) * ow + 2 * xx;
                        gx[y * w + xx] += static_cast<T>(
                            static_cast<double>(p[0]) + static_cast<double>(p[1]) +
                            static_cast<double>(p[ow]) + static_cast<double>(p[ow + 1]));
                    }
            }
        };
    }
    return out;
}

template <typename T>
NodePtr<T> concat_channels(const std::vector<NodePtr<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: no inputs");
    const int h = xs[0]->shape[1], w = xs[0]->shape[2];
    int c_total = 0;
    for (const auto& x : xs) {
        if (x->shape.rank != 3 || x->shape[1] != h || x->shape[2] != w)
            throw ShapeError("concat_channels: inputs must share [*,h,w], got " + x->shape.str());
        c_total += x->shape[0];
    }
    auto out = make_node<T>(Shape::of({c_total, h, w}));
    out->parents = xs;
    out->needs_grad = detail::any_needs_grad(xs);
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->value.begin(), x->value.end(), out->value.begin() + static_cast<std::ptrdiff_t>(off));
        off += x->value.size();
    }
    if (out->needs_grad) {
        out->backward_fn = [](Node<T>& self) {
            std::size_t pos = 0;
            for (const auto& p : self.parents) {
                if (p->needs_grad)
                    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[pos + i];
                pos += p->value.size();
            }
        };
    }
    return out;
}

template <typename T>
NodePtr<T> add(const NodePtr<T>& x, const NodePtr<T>& y) {
    if (x->shape != y->shape)
        throw ShapeError("add: shape " + x->shape.str() + " vs " + y->shape.str());
    auto out = make_node<T>(x->shape);
    out->parents = {x, y};
    out->needs_grad = x->needs_grad || y->needs_grad;
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = x->value[i] + y->value[i];
    if (out->needs_grad) {
        Node<T>* xp = x.get();
        Node<T>* yp = y.get();
        out->backward_fn = [xp, yp](Node<T>& self) {
            if (xp->needs_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += self.grad[i];
            if (yp->needs_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i) yp->grad[i] += self.grad[i];
        };
    }
    return out;
}

template <typename T>
NodePtr<T> scale(const NodePtr<T>& x, double alpha) {
    auto out = make_node<T>(x->shape);
    out->parents = {x};
    out->needs_grad = x->needs_grad;
    const T a = static_cast<T>(alpha);
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a * x->value[i];
    if (out->needs_grad) {
        Node<T>* xp = x.get();
        out->backward_fn = [xp, a](Node<T>& self) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += a * self.grad[i];
        };
    }
    return out;
}

} // namespace v2v3d::nn
