#pragma once

// Differentiable operators over N x C x H x W tensors. Every op has a fixed
// reduction order so results are bitwise reproducible.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "eafnet/autograd.hpp"

namespace eafnet::autograd {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using CMatMap = Eigen::Map<const RowMat<T>>;

inline void require_rank(const Shape& s, int rank, const char* op)
{
    if (static_cast<int>(s.size()) != rank) {
        throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                    shape_str(s));
    }
}

template <class T>
void im2col(const T* src, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* col)
{
    const int hw = ho * wo;
    for (int ch = 0; ch < c; ++ch) {
        const T* plane = src + static_cast<std::size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + static_cast<std::size_t>((ch * k + ky) * k + kx) * hw;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    T* row = dst + oy * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(row, row + wo, T(0));
                        continue;
                    }
                    const T* srow = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* dst)
{
    const int hw = ho * wo;
    for (int ch = 0; ch < c; ++ch) {
        T* plane = dst + static_cast<std::size_t>(ch) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = col + static_cast<std::size_t>((ch * k + ky) * k + kx) * hw;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* drow = plane + static_cast<std::size_t>(iy) * w;
                    const T* row = src + oy * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) drow[ix] += row[ox];
                    }
                }
            }
        }
    }
}

struct ResizeTap {
    int i0 = 0, i1 = 0;
    double frac = 0;
};

// Half-pixel-centre sampling positions (align_corners = false).
inline std::vector<ResizeTap> resize_taps(int in, int out)
{
    std::vector<ResizeTap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0) src = 0;
        int i0 = static_cast<int>(src);
        if (i0 > in - 1) i0 = in - 1;
        int i1 = std::min(i0 + 1, in - 1);
        taps[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return taps;
}

}  // namespace detail

// Cross-correlation. x: N x C x H x W, w: O x C x k x k, bias: O (optional).
template <class T>
Var<T> conv2d(Graph<T>& g, const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad)
{
    using namespace detail;
    require_rank(x.shape(), 4, "conv2d input");
    require_rank(w.shape(), 4, "conv2d weight");
    const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
    const int o = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != c || w.shape()[3] != k) {
        throw std::invalid_argument("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " +
                                    shape_str(x.shape()));
    }
    if (bias.defined() && (bias.shape().size() != 1 || bias.shape()[0] != o)) {
        throw std::invalid_argument("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                                    std::to_string(o) + " output channels");
    }
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
    const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
    if (h + 2 * pad < k || wd + 2 * pad < k) {
        throw std::invalid_argument("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                                    shape_str(x.shape()));
    }
    const int ckk = c * k * k, hw = ho * wo;
    const bool direct = (k == 1 && stride == 1 && pad == 0);
    const bool keep_cols = g.recording() && w.requires_grad() && !direct;

    Tensor<T> y({n, o, ho, wo});
    auto cols = std::make_shared<AlignedVector<T>>();
    AlignedVector<T> scratch;
    if (!direct) {
        if (keep_cols) {
            cols->resize(static_cast<std::size_t>(n) * ckk * hw);
        } else {
            scratch.resize(static_cast<std::size_t>(ckk) * hw);
        }
    }
    CMatMap<T> wm(w.value().data(), o, ckk);
    for (int b = 0; b < n; ++b) {
        const T* xb = x.value().data() + static_cast<std::size_t>(b) * c * h * wd;
        const T* col = xb;
        if (!direct) {
            T* dst = keep_cols ? cols->data() + static_cast<std::size_t>(b) * ckk * hw : scratch.data();
            im2col(xb, c, h, wd, k, stride, pad, ho, wo, dst);
            col = dst;
        }
        MatMap<T> ym(y.data() + static_cast<std::size_t>(b) * o * hw, o, hw);
        ym.noalias() = wm * CMatMap<T>(col, ckk, hw);
        if (bias.defined()) {
            for (int oc = 0; oc < o; ++oc) ym.row(oc).array() += bias.value()[static_cast<std::size_t>(oc)];
        }
    }

    Var<T> out = make_output(g, std::move(y), {&x, &w, &bias}, "conv2d");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), wn = w.node(), bn = bias.node(), cols, n, c, h, wd, o, k, stride,
                  pad, ho, wo, ckk, hw, direct] {
            if (!on->has_grad()) return;
            const T* gy = on->grad.data();
            CMatMap<T> wm(wn->value.data(), o, ckk);
            AlignedVector<T> scratch;
            for (int b = 0; b < n; ++b) {
                CMatMap<T> dy(gy + static_cast<std::size_t>(b) * o * hw, o, hw);
                const T* xb = xn->value.data() + static_cast<std::size_t>(b) * c * h * wd;
                if (wn->requires_grad) {
                    const T* col = direct ? xb : cols->data() + static_cast<std::size_t>(b) * ckk * hw;
                    MatMap<T>(wn->grad_ref().data(), o, ckk).noalias() += dy * CMatMap<T>(col, ckk, hw).transpose();
                }
                if (bn && bn->requires_grad) {
                    T* gb = bn->grad_ref().data();
                    for (int oc = 0; oc < o; ++oc) gb[oc] += dy.row(oc).sum();
                }
                if (xn->requires_grad) {
                    T* gx = xn->grad_ref().data() + static_cast<std::size_t>(b) * c * h * wd;
                    if (direct) {
                        MatMap<T>(gx, ckk, hw).noalias() += wm.transpose() * dy;
                    } else {
                        scratch.resize(static_cast<std::size_t>(ckk) * hw);
                        MatMap<T>(scratch.data(), ckk, hw).noalias() = wm.transpose() * dy;
                        detail::col2im_add(scratch.data(), c, h, wd, k, stride, pad, ho, wo, gx);
                    }
                }
            }
        });
    }
    return out;
}

// 1-D cross-correlation along the channel axis of an N x C tensor with a
// shared length-K kernel. Zero padding left floor((K-1)/2), right
// ceil((K-1)/2), so the output keeps length C for even and odd K.
template <class T>
Var<T> conv1d_channels(Graph<T>& g, const Var<T>& v, const Var<T>& kernel)
{
    detail::require_rank(v.shape(), 2, "conv1d_channels input");
    detail::require_rank(kernel.shape(), 1, "conv1d_channels kernel");
    const int n = v.shape()[0], c = v.shape()[1], kk = kernel.shape()[0];
    const int left = (kk - 1) / 2;
    Tensor<T> y({n, c});
    const T* vd = v.value().data();
    const T* kd = kernel.value().data();
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            T acc = 0;
            for (int j = 0; j < kk; ++j) {
                const int src = ch + j - left;
                if (src >= 0 && src < c) acc += kd[j] * vd[b * c + src];
            }
            y[static_cast<std::size_t>(b * c + ch)] = acc;
        }
    }
    Var<T> out = make_output(g, std::move(y), {&v, &kernel}, "conv1d_channels");
    if (out.requires_grad()) {
        g.record([on = out.node(), vn = v.node(), kn = kernel.node(), n, c, kk, left] {
            if (!on->has_grad()) return;
            const T* go = on->grad.data();
            const T* vd = vn->value.data();
            const T* kd = kn->value.data();
            T* gv = vn->requires_grad ? vn->grad_ref().data() : nullptr;
            T* gk = kn->requires_grad ? kn->grad_ref().data() : nullptr;
            for (int b = 0; b < n; ++b) {
                for (int ch = 0; ch < c; ++ch) {
                    const T d = go[b * c + ch];
                    for (int j = 0; j < kk; ++j) {
                        const int src = ch + j - left;
                        if (src < 0 || src >= c) continue;
                        if (gv) gv[b * c + src] += kd[j] * d;
                        if (gk) gk[j] += vd[b * c + src] * d;
                    }
                }
            }
        });
    }
    return out;
}

// Per-channel spatial mean: N x C x H x W -> N x C.
template <class T>
Var<T> global_avg_pool(Graph<T>& g, const Var<T>& x)
{
    detail::require_rank(x.shape(), 4, "global_avg_pool");
    const int n = x.shape()[0], c = x.shape()[1];
    const std::size_t hw = static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
    Tensor<T> y({n, c});
    const T* xd = x.value().data();
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
        T acc = 0;
        for (std::size_t i = 0; i < hw; ++i) acc += xd[nc * hw + i];
        y[nc] = acc / static_cast<T>(hw);
    }
    Var<T> out = make_output(g, std::move(y), {&x}, "global_avg_pool");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), n, c, hw] {
            if (!on->has_grad()) return;
            T* gx = xn->grad_ref().data();
            for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
                const T d = on->grad[nc] / static_cast<T>(hw);
                for (std::size_t i = 0; i < hw; ++i) gx[nc * hw + i] += d;
            }
        });
    }
    return out;
}

// Non-overlapping k x k max pooling. Ties resolve to the first element in
// row-major order within the window.
template <class T>
Var<T> max_pool2d(Graph<T>& g, const Var<T>& x, int k = 2)
{
    detail::require_rank(x.shape(), 4, "max_pool2d");
    const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    if (k < 1 || h < k || w < k) throw std::invalid_argument("max_pool2d: input " + shape_str(x.shape()) +
                                                             " smaller than pool " + std::to_string(k));
    const int ho = h / k, wo = w / k;
    Tensor<T> y({n, c, ho, wo});
    auto arg = std::make_shared<std::vector<std::size_t>>(y.numel());
    const T* xd = x.value().data();
    std::size_t oi = 0;
    for (int nc = 0; nc < n * c; ++nc) {
        const std::size_t base = static_cast<std::size_t>(nc) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox, ++oi) {
                std::size_t best = base + static_cast<std::size_t>(oy * k) * w + ox * k;
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        std::size_t idx = base + static_cast<std::size_t>(oy * k + dy) * w + ox * k + dx;
                        if (xd[idx] > xd[best]) best = idx;
                    }
                }
                (*arg)[oi] = best;
                kink_probe::fold(best);
                y[oi] = xd[best];
            }
        }
    }
    Var<T> out = make_output(g, std::move(y), {&x}, "max_pool2d");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), arg] {
            if (!on->has_grad()) return;
            T* gx = xn->grad_ref().data();
            for (std::size_t i = 0; i < arg->size(); ++i) gx[(*arg)[i]] += on->grad[i];
        });
    }
    return out;
}

// Adaptive average pooling to a grid x grid output. Bin i covers
// [floor(i*H/grid), ceil((i+1)*H/grid)).
template <class T>
Var<T> avg_pool_grid(Graph<T>& g, const Var<T>& x, int grid)
{
    detail::require_rank(x.shape(), 4, "avg_pool_grid");
    const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    if (grid < 1 || h < grid || w < grid) {
        throw std::invalid_argument("avg_pool_grid: input " + shape_str(x.shape()) + " smaller than grid " +
                                    std::to_string(grid));
    }
    auto bounds = [grid](int len, int i) {
        return std::pair<int, int>{i * len / grid, ((i + 1) * len + grid - 1) / grid};
    };
    Tensor<T> y({n, c, grid, grid});
    const T* xd = x.value().data();
    for (int nc = 0; nc < n * c; ++nc) {
        const T* plane = xd + static_cast<std::size_t>(nc) * h * w;
        for (int gy = 0; gy < grid; ++gy) {
            auto [y0, y1] = bounds(h, gy);
            for (int gx = 0; gx < grid; ++gx) {
                auto [x0, x1] = bounds(w, gx);
                T acc = 0;
                for (int yy = y0; yy < y1; ++yy) {
                    for (int xx = x0; xx < x1; ++xx) acc += plane[yy * w + xx];
                }
                y[(static_cast<std::size_t>(nc) * grid + gy) * grid + gx] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
            }
        }
    }
    Var<T> out = make_output(g, std::move(y), {&x}, "avg_pool_grid");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), n, c, h, w, grid, bounds] {
            if (!on->has_grad()) return;
            T* gxd = xn->grad_ref().data();
            for (int nc = 0; nc < n * c; ++nc) {
                T* plane = gxd + static_cast<std::size_t>(nc) * h * w;
                for (int gy = 0; gy < grid; ++gy) {
                    auto [y0, y1] = bounds(h, gy);
                    for (int gx = 0; gx < grid; ++gx) {
                        auto [x0, x1] = bounds(w, gx);
                        const T d = on->grad[(static_cast<std::size_t>(nc) * grid + gy) * grid + gx] /
                                    static_cast<T>((y1 - y0) * (x1 - x0));
                        for (int yy = y0; yy < y1; ++yy) {
                            for (int xx = x0; xx < x1; ++xx) plane[yy * w + xx] += d;
                        }
                    }
                }
            }
        });
    }
    return out;
}

template <class T>
Var<T> relu(Graph<T>& g, const Var<T>& x)
{
    Tensor<T> y = x.value();
    for (T& v : y.storage()) v = v > T(0) ? v : T(0);
    if (kink_probe::signature) {
        std::uint64_t bits = 0;
        std::size_t i = 0;
        for (T v : x.value().values()) {
            bits = (bits << 1) | (v > T(0));
            if (++i % 64 == 0) kink_probe::fold(bits);
        }
        kink_probe::fold(bits);
    }
    Var<T> out = make_output(g, std::move(y), {&x}, "relu");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node()] {
            if (!on->has_grad()) return;
            T* gx = xn->grad_ref().data();
            const T* xd = xn->value.data();
            for (std::size_t i = 0; i < on->grad.numel(); ++i) {
                if (xd[i] > T(0)) gx[i] += on->grad[i];
            }
        });
    }
    return out;
}

template <class T>
Var<T> sigmoid(Graph<T>& g, const Var<T>& x)
{
    Tensor<T> y = x.value();
    for (T& v : y.storage()) v = T(1) / (T(1) + std::exp(-v));
    Var<T> out = make_output(g, std::move(y), {&x}, "sigmoid");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node()] {
            if (!on->has_grad()) return;
            T* gx = xn->grad_ref().data();
            const bool corrupt = fault_injection::corrupt_sigmoid_backward;
            for (std::size_t i = 0; i < on->grad.numel(); ++i) {
                const T s = on->value[i];
                gx[i] += on->grad[i] * (corrupt ? s : s * (T(1) - s));
            }
        });
    }
    return out;
}

template <class T>
Var<T> add(Graph<T>& g, const Var<T>& a, const Var<T>& b)
{
    a.value().require_same_shape(b.value(), "add");
    Tensor<T> y = a.value();
    y += b.value();
    Var<T> out = make_output(g, std::move(y), {&a, &b}, "add");
    if (out.requires_grad()) {
        g.record([on = out.node(), an = a.node(), bn = b.node()] {
            if (!on->has_grad()) return;
            if (an->requires_grad) an->grad_ref() += on->grad;
            if (bn->requires_grad) bn->grad_ref() += on->grad;
        });
    }
    return out;
}

template <class T>
Var<T> mul(Graph<T>& g, const Var<T>& a, const Var<T>& b)
{
    a.value().require_same_shape(b.value(), "mul");
    Tensor<T> y = a.value();
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= b.value()[i];
    Var<T> out = make_output(g, std::move(y), {&a, &b}, "mul");
    if (out.requires_grad()) {
        g.record([on = out.node(), an = a.node(), bn = b.node()] {
            if (!on->has_grad()) return;
            for (std::size_t i = 0; i < on->grad.numel(); ++i) {
                if (an->requires_grad) an->grad_ref()[i] += on->grad[i] * bn->value[i];
                if (bn->requires_grad) bn->grad_ref()[i] += on->grad[i] * an->value[i];
            }
        });
    }
    return out;
}

template <class T>
Var<T> scale(Graph<T>& g, const Var<T>& x, T s)
{
    Tensor<T> y = x.value();
    for (T& v : y.storage()) v *= s;
    Var<T> out = make_output(g, std::move(y), {&x}, "scale");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), s] {
            if (!on->has_grad()) return;
            T* gx = xn->grad_ref().data();
            for (std::size_t i = 0; i < on->grad.numel(); ++i) gx[i] += s * on->grad[i];
        });
    }
    return out;
}

// E[n,k,i,j] = A[n,k,i,j] * D[n,k].
template <class T>
Var<T> channel_scale(Graph<T>& g, const Var<T>& x, const Var<T>& d)
{
    detail::require_rank(x.shape(), 4, "channel_scale input");
    detail::require_rank(d.shape(), 2, "channel_scale weights");
    const int n = x.shape()[0], c = x.shape()[1];
    if (d.shape()[0] != n || d.shape()[1] != c) {
        throw std::invalid_argument("channel_scale: weights " + shape_str(d.shape()) + " vs input " +
                                    shape_str(x.shape()));
    }
    const std::size_t hw = static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
    Tensor<T> y = x.value();
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
        const T s = d.value()[nc];
        for (std::size_t i = 0; i < hw; ++i) y[nc * hw + i] *= s;
    }
    Var<T> out = make_output(g, std::move(y), {&x, &d}, "channel_scale");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), dn = d.node(), n, c, hw] {
            if (!on->has_grad()) return;
            for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
                const T* go = on->grad.data() + nc * hw;
                if (xn->requires_grad) {
                    T* gx = xn->grad_ref().data() + nc * hw;
                    const T s = dn->value[nc];
                    for (std::size_t i = 0; i < hw; ++i) gx[i] += go[i] * s;
                }
                if (dn->requires_grad) {
                    const T* xd = xn->value.data() + nc * hw;
                    T acc = 0;
                    for (std::size_t i = 0; i < hw; ++i) acc += go[i] * xd[i];
                    dn->grad_ref()[nc] += acc;
                }
            }
        });
    }
    return out;
}

template <class T>
Var<T> concat_channels(Graph<T>& g, const std::vector<Var<T>>& parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
    for (const auto& p : parts) detail::require_rank(p.shape(), 4, "concat_channels");
    const int n = parts[0].shape()[0], h = parts[0].shape()[2], w = parts[0].shape()[3];
    int total = 0;
    for (const auto& p : parts) {
        if (p.shape()[0] != n || p.shape()[2] != h || p.shape()[3] != w) {
            throw std::invalid_argument("concat_channels: " + shape_str(p.shape()) + " vs " +
                                        shape_str(parts[0].shape()));
        }
        total += p.shape()[1];
    }
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    Tensor<T> y({n, total, h, w});
    for (int b = 0; b < n; ++b) {
        T* dst = y.data() + static_cast<std::size_t>(b) * total * hw;
        for (const auto& p : parts) {
            const std::size_t len = static_cast<std::size_t>(p.shape()[1]) * hw;
            const T* src = p.value().data() + b * len;
            dst = std::copy(src, src + len, dst);
        }
    }
    Var<T> out = make_output(g, std::move(y), parts, "concat_channels");
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<Node<T>>> nodes;
        for (const auto& p : parts) nodes.push_back(p.node());
        g.record([on = out.node(), nodes, n, total, hw] {
            if (!on->has_grad()) return;
            for (int b = 0; b < n; ++b) {
                const T* src = on->grad.data() + static_cast<std::size_t>(b) * total * hw;
                for (const auto& pn : nodes) {
                    const std::size_t len = static_cast<std::size_t>(pn->value.shape()[1]) * hw;
                    if (pn->requires_grad) {
                        T* gd = pn->grad_ref().data() + b * len;
                        for (std::size_t i = 0; i < len; ++i) gd[i] += src[i];
                    }
                    src += len;
                }
            }
        });
    }
    return out;
}

// Bilinear resampling with half-pixel centres (align_corners = false).
template <class T>
Var<T> bilinear_resize(Graph<T>& g, const Var<T>& x, int out_h, int out_w)
{
    detail::require_rank(x.shape(), 4, "bilinear_resize");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: output dims must be positive");
    const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    auto ty = std::make_shared<std::vector<detail::ResizeTap>>(detail::resize_taps(h, out_h));
    auto tx = std::make_shared<std::vector<detail::ResizeTap>>(detail::resize_taps(w, out_w));
    Tensor<T> y({n, c, out_h, out_w});
    const T* xd = x.value().data();
    for (int nc = 0; nc < n * c; ++nc) {
        const T* plane = xd + static_cast<std::size_t>(nc) * h * w;
        T* dst = y.data() + static_cast<std::size_t>(nc) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const auto& a = (*ty)[static_cast<std::size_t>(oy)];
            const T fy = static_cast<T>(a.frac);
            for (int ox = 0; ox < out_w; ++ox) {
                const auto& b = (*tx)[static_cast<std::size_t>(ox)];
                const T fx = static_cast<T>(b.frac);
                const T top = (T(1) - fx) * plane[a.i0 * w + b.i0] + fx * plane[a.i0 * w + b.i1];
                const T bot = (T(1) - fx) * plane[a.i1 * w + b.i0] + fx * plane[a.i1 * w + b.i1];
                dst[oy * out_w + ox] = (T(1) - fy) * top + fy * bot;
            }
        }
    }
    Var<T> out = make_output(g, std::move(y), {&x}, "bilinear_resize");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), ty, tx, n, c, h, w, out_h, out_w] {
            if (!on->has_grad()) return;
            T* gxd = xn->grad_ref().data();
            for (int nc = 0; nc < n * c; ++nc) {
                T* plane = gxd + static_cast<std::size_t>(nc) * h * w;
                const T* go = on->grad.data() + static_cast<std::size_t>(nc) * out_h * out_w;
                for (int oy = 0; oy < out_h; ++oy) {
                    const auto& a = (*ty)[static_cast<std::size_t>(oy)];
                    const T fy = static_cast<T>(a.frac);
                    for (int ox = 0; ox < out_w; ++ox) {
                        const auto& b = (*tx)[static_cast<std::size_t>(ox)];
                        const T fx = static_cast<T>(b.frac);
                        const T d = go[oy * out_w + ox];
                        plane[a.i0 * w + b.i0] += d * (T(1) - fy) * (T(1) - fx);
                        plane[a.i0 * w + b.i1] += d * (T(1) - fy) * fx;
                        plane[a.i1 * w + b.i0] += d * fy * (T(1) - fx);
                        plane[a.i1 * w + b.i1] += d * fy * fx;
                    }
                }
            }
        });
    }
    return out;
}

template <class T>
Var<T> upsample2x(Graph<T>& g, const Var<T>& x)
{
    detail::require_rank(x.shape(), 4, "upsample2x");
    return bilinear_resize(g, x, 2 * x.shape()[2], 2 * x.shape()[3]);
}

template <class T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;
};

enum class NormMode {
    train,        // batch statistics, running stats updated
    eval,         // running statistics
    affine_only,  // y = gamma * x + beta, for batch-1 use without running stats
};

template <class T>
Var<T> batchnorm2d(Graph<T>& g, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state,
                   NormMode mode, double momentum = 0.1, double eps = 1e-5)
{
    detail::require_rank(x.shape(), 4, "batchnorm2d");
    const int n = x.shape()[0], c = x.shape()[1];
    const std::size_t hw = static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
        throw std::invalid_argument("batchnorm2d: affine params must have shape [" + std::to_string(c) + "]");
    }
    if (mode == NormMode::train && n < 2) {
        throw std::invalid_argument("batchnorm2d: training mode needs batch >= 2, got " + std::to_string(n));
    }
    const T* xd = x.value().data();
    Tensor<T> xhat(x.shape());
    auto invstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c), T(1));
    for (int ch = 0; ch < c; ++ch) {
        double mean = 0, var = 1;
        if (mode == NormMode::train) {
            double s = 0;
            for (int b = 0; b < n; ++b) {
                const T* p = xd + (static_cast<std::size_t>(b) * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) s += p[i];
            }
            const double m = static_cast<double>(n) * hw;
            mean = s / m;
            double ss = 0;
            for (int b = 0; b < n; ++b) {
                const T* p = xd + (static_cast<std::size_t>(b) * c + ch) * hw;
                for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - mean) * (p[i] - mean);
            }
            var = ss / m;
            const double unbiased = m > 1 ? ss / (m - 1) : var;
            state.running_mean[static_cast<std::size_t>(ch)] = static_cast<T>(
                (1 - momentum) * state.running_mean[static_cast<std::size_t>(ch)] + momentum * mean);
            state.running_var[static_cast<std::size_t>(ch)] = static_cast<T>(
                (1 - momentum) * state.running_var[static_cast<std::size_t>(ch)] + momentum * unbiased);
        } else if (mode == NormMode::eval) {
            mean = state.running_mean[static_cast<std::size_t>(ch)];
            var = state.running_var[static_cast<std::size_t>(ch)];
        }
        const T is = mode == NormMode::affine_only ? T(1) : static_cast<T>(1.0 / std::sqrt(var + eps));
        const T mu = mode == NormMode::affine_only ? T(0) : static_cast<T>(mean);
        (*invstd)[static_cast<std::size_t>(ch)] = is;
        for (int b = 0; b < n; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) xhat[off + i] = (xd[off + i] - mu) * is;
        }
    }
    Tensor<T> y(x.shape());
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
            const T ga = gamma.value()[static_cast<std::size_t>(ch)], be = beta.value()[static_cast<std::size_t>(ch)];
            for (std::size_t i = 0; i < hw; ++i) y[off + i] = ga * xhat[off + i] + be;
        }
    }
    Var<T> out = make_output(g, std::move(y), {&x, &gamma, &beta}, "batchnorm2d");
    if (out.requires_grad()) {
        auto xh = std::make_shared<Tensor<T>>(std::move(xhat));
        const bool batch_stats = mode == NormMode::train;
        g.record([on = out.node(), xn = x.node(), gn = gamma.node(), bn = beta.node(), xh, invstd, n, c, hw,
                  batch_stats] {
            if (!on->has_grad()) return;
            const T* go = on->grad.data();
            const double m = static_cast<double>(n) * hw;
            for (int ch = 0; ch < c; ++ch) {
                double sum_g = 0, sum_gx = 0;
                for (int b = 0; b < n; ++b) {
                    const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        sum_g += go[off + i];
                        sum_gx += go[off + i] * (*xh)[off + i];
                    }
                }
                if (gn->requires_grad) gn->grad_ref()[static_cast<std::size_t>(ch)] += static_cast<T>(sum_gx);
                if (bn->requires_grad) bn->grad_ref()[static_cast<std::size_t>(ch)] += static_cast<T>(sum_g);
                if (!xn->requires_grad) continue;
                const T ga = gn->value[static_cast<std::size_t>(ch)];
                const T is = (*invstd)[static_cast<std::size_t>(ch)];
                T* gx = xn->grad_ref().data();
                for (int b = 0; b < n; ++b) {
                    const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        if (batch_stats) {
                            const double v = (go[off + i] - sum_g / m - (*xh)[off + i] * sum_gx / m);
                            gx[off + i] += static_cast<T>(ga * is * v);
                        } else {
                            gx[off + i] += go[off + i] * ga * is;
                        }
                    }
                }
            }
        });
    }
    return out;
}

// Mean over non-ignored pixels of -log softmax at the true class.
// logits: N x K x H x W, labels: N*H*W class ids in row-major order.
// With every pixel ignored the loss is 0 and no gradient flows.
template <class T>
Var<T> softmax_cross_entropy(Graph<T>& g, const Var<T>& logits, const std::vector<int>& labels,
                             const std::vector<int>& ignore_ids = {}, std::size_t* counted_out = nullptr)
{
    detail::require_rank(logits.shape(), 4, "softmax_cross_entropy");
    const int n = logits.shape()[0], k = logits.shape()[1];
    const std::size_t hw = static_cast<std::size_t>(logits.shape()[2]) * logits.shape()[3];
    if (labels.size() != static_cast<std::size_t>(n) * hw) {
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                                    shape_str(logits.shape()));
    }
    auto ignored = [&ignore_ids](int id) {
        return std::find(ignore_ids.begin(), ignore_ids.end(), id) != ignore_ids.end();
    };
    auto probs = std::make_shared<Tensor<T>>(logits.shape());
    auto mask = std::make_shared<std::vector<int>>(labels.size(), -1);
    const T* ld = logits.value().data();
    double total = 0;
    std::size_t counted = 0;
    std::vector<T> z(static_cast<std::size_t>(k));
    for (int b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < hw; ++p) {
            const int label = labels[static_cast<std::size_t>(b) * hw + p];
            T mx = ld[(static_cast<std::size_t>(b) * k) * hw + p];
            for (int j = 0; j < k; ++j) mx = std::max(mx, ld[(static_cast<std::size_t>(b) * k + j) * hw + p]);
            T denom = 0;
            for (int j = 0; j < k; ++j) {
                z[static_cast<std::size_t>(j)] = std::exp(ld[(static_cast<std::size_t>(b) * k + j) * hw + p] - mx);
                denom += z[static_cast<std::size_t>(j)];
            }
            for (int j = 0; j < k; ++j) {
                (*probs)[(static_cast<std::size_t>(b) * k + j) * hw + p] = z[static_cast<std::size_t>(j)] / denom;
            }
            if (ignored(label)) continue;
            if (label < 0 || label >= k) {
                throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                            " outside [0," + std::to_string(k) + ")");
            }
            (*mask)[static_cast<std::size_t>(b) * hw + p] = label;
            const T lt = ld[(static_cast<std::size_t>(b) * k + label) * hw + p];
            total += static_cast<double>(std::log(denom) + mx - lt);
            ++counted;
        }
    }
    if (counted_out) *counted_out = counted;
    if (counted == 0) std::clog << "[warn] softmax_cross_entropy: every pixel ignored, loss is 0\n";
    Tensor<T> y({1}, counted ? static_cast<T>(total / static_cast<double>(counted)) : T(0));
    Var<T> out = make_output(g, std::move(y), {&logits}, "softmax_cross_entropy");
    if (out.requires_grad() && counted > 0) {
        g.record([on = out.node(), ln = logits.node(), probs, mask, n, k, hw, counted] {
            if (!on->has_grad()) return;
            const T scale = on->grad[0] / static_cast<T>(counted);
            T* gl = ln->grad_ref().data();
            for (int b = 0; b < n; ++b) {
                for (std::size_t p = 0; p < hw; ++p) {
                    const int label = (*mask)[static_cast<std::size_t>(b) * hw + p];
                    if (label < 0) continue;
                    for (int j = 0; j < k; ++j) {
                        const std::size_t idx = (static_cast<std::size_t>(b) * k + j) * hw + p;
                        gl[idx] += scale * ((*probs)[idx] - (j == label ? T(1) : T(0)));
                    }
                }
            }
        });
    }
    return out;
}

template <class T>
Var<T> sum(Graph<T>& g, const Var<T>& x)
{
    T acc = 0;
    for (T v : x.value().values()) acc += v;
    Var<T> out = make_output(g, Tensor<T>({1}, acc), {&x}, "sum");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node()] {
            if (!on->has_grad()) return;
            for (T& v : xn->grad_ref().storage()) v += on->grad[0];
        });
    }
    return out;
}

// Scalar <x, weights>: a fixed projection that reduces any tensor output to
// a scalar for gradient checking.
template <class T>
Var<T> weighted_sum(Graph<T>& g, const Var<T>& x, const Tensor<T>& weights)
{
    x.value().require_same_shape(weights, "weighted_sum");
    T acc = 0;
    for (std::size_t i = 0; i < weights.numel(); ++i) acc += x.value()[i] * weights[i];
    Var<T> out = make_output(g, Tensor<T>({1}, acc), {&x}, "weighted_sum");
    if (out.requires_grad()) {
        g.record([on = out.node(), xn = x.node(), weights] {
            if (!on->has_grad()) return;
            T* gx = xn->grad_ref().data();
            for (std::size_t i = 0; i < weights.numel(); ++i) gx[i] += on->grad[0] * weights[i];
        });
    }
    return out;
}

}  // namespace eafnet::autograd
