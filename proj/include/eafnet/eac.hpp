#pragma once

// Efficient attention complementary (EAC) module and the stage fusion rule.

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "eafnet/ops.hpp"

namespace eafnet::nn {

using autograd::Graph;
using autograd::Var;

enum class KernelParity {
    even,   // t even -> K = t, else t + 1 (always even for C >= 2)
    odd,    // t odd  -> K = t, else t + 1
};

// Channel-adaptive 1-D kernel size: t = int(|log2(C) + b| / gamma), then the
// parity rule; never below 1.
inline int adaptive_kernel_size(int channels, double b = 1.0, double gamma = 2.0,
                                KernelParity parity = KernelParity::even)
{
    if (channels < 1) throw std::invalid_argument("adaptive_kernel_size: channels must be >= 1");
    const int t = static_cast<int>(std::abs(std::log2(static_cast<double>(channels)) + b) / gamma);
    int k = 0;
    if (parity == KernelParity::even) {
        k = t % 2 == 0 ? t : t + 1;
    } else {
        k = t % 2 == 1 ? t : t + 1;
    }
    return std::max(k, 1);
}

template <class T>
struct EacOutput {
    Var<T> weights;   // D: N x C, in (0, 1)
    Var<T> adjusted;  // E: x with channel k scaled by D[:, k]
};

template <class T>
class EacModule {
public:
    EacModule() = default;
    EacModule(int channels, int kernel_size) : channels_(channels), kernel_(Tensor<T>({kernel_size}), true)
    {
        if (channels < 1 || kernel_size < 1) throw std::invalid_argument("EacModule: bad channels/kernel size");
    }

    static EacModule from_channels(int channels, double b = 1.0, double gamma = 2.0,
                                   KernelParity parity = KernelParity::even)
    {
        return EacModule(channels, adaptive_kernel_size(channels, b, gamma, parity));
    }

    int channels() const { return channels_; }
    int kernel_size() const { return kernel_.shape()[0]; }
    Var<T>& kernel() { return kernel_; }
    const Var<T>& kernel() const { return kernel_; }

    void init_random(std::mt19937_64& rng)
    {
        std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(kernel_size())));
        for (T& v : kernel_.value().storage()) v = static_cast<T>(nd(rng));
    }

    // Global average pool -> channel conv1d -> sigmoid -> per-channel rescale.
    EacOutput<T> forward(Graph<T>& g, const Var<T>& x) const
    {
        if (x.shape().size() != 4 || x.shape()[1] != channels_) {
            throw std::invalid_argument("EacModule: expected " + std::to_string(channels_) + " channels, got " +
                                        shape_str(x.shape()));
        }
        Var<T> pooled = autograd::global_avg_pool(g, x);
        Var<T> mixed = autograd::conv1d_channels(g, pooled, kernel_);
        Var<T> d = autograd::sigmoid(g, mixed);
        return {d, autograd::channel_scale(g, x, d)};
    }

private:
    int channels_ = 0;
    Var<T> kernel_;
};

template <class T>
struct FuseOutput {
    Var<T> fused;
    std::vector<Var<T>> weights;  // one N x C attention vector per branch
};

// m_next = sum_b y_b * EAC_b(y_b) + m_prev, with m_prev omitted at the first stage.
template <class T>
FuseOutput<T> fuse_stage(Graph<T>& g, const std::vector<Var<T>>& features, const std::vector<const EacModule<T>*>& eacs,
                         const std::optional<Var<T>>& m_prev)
{
    if (features.empty() || features.size() != eacs.size()) {
        throw std::invalid_argument("fuse_stage: need one EAC module per branch feature");
    }
    for (const auto& f : features) {
        if (f.shape() != features.front().shape()) {
            throw std::invalid_argument("fuse_stage: branch shapes differ " + shape_str(f.shape()) + " vs " +
                                        shape_str(features.front().shape()));
        }
    }
    if (m_prev && m_prev->shape() != features.front().shape()) {
        throw std::invalid_argument("fuse_stage: fusion feature " + shape_str(m_prev->shape()) +
                                    " does not match branch " + shape_str(features.front().shape()));
    }
    FuseOutput<T> out;
    Var<T> acc;
    for (std::size_t b = 0; b < features.size(); ++b) {
        EacOutput<T> e = eacs[b]->forward(g, features[b]);
        out.weights.push_back(e.weights);
        acc = acc.defined() ? autograd::add(g, acc, e.adjusted) : e.adjusted;
    }
    if (m_prev) acc = autograd::add(g, acc, *m_prev);
    out.fused = acc;
    return out;
}

}  // namespace eafnet::nn
