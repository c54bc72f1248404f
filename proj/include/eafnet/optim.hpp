#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "eafnet/autograd.hpp"

namespace eafnet::optim {

template <class T>
struct Param {
    std::string name;
    autograd::Var<T> var;
    bool decay = true;  // L2 term applies (conv weights); false for biases and norm affine
};

template <class T>
using ParamList = std::vector<Param<T>>;

template <class T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
};

// One bias-corrected Adam update. Weight decay enters as an L2 gradient term
// g += wd * theta on decayed parameters before the moment updates.
template <class T>
void adam_step(ParamList<T>& params, AdamState<T>& st, double lr, double weight_decay)
{
    if (st.m.empty()) {
        for (auto& p : params) {
            st.m.emplace_back(p.var.shape());
            st.v.emplace_back(p.var.shape());
        }
    }
    if (st.m.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter count mismatch");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        Tensor<T>& theta = p.var.value();
        if (st.m[k].shape() != theta.shape()) {
            throw std::invalid_argument("adam_step: moment shape mismatch for " + p.name);
        }
        const bool have_grad = p.var.has_grad();
        const double wd = p.decay ? weight_decay : 0.0;
        for (std::size_t i = 0; i < theta.numel(); ++i) {
            double g = have_grad ? static_cast<double>(p.var.grad()[i]) : 0.0;
            g += wd * theta[i];
            const double m = st.beta1 * st.m[k][i] + (1 - st.beta1) * g;
            const double v = st.beta2 * st.v[k][i] + (1 - st.beta2) * g * g;
            st.m[k][i] = static_cast<T>(m);
            st.v[k][i] = static_cast<T>(v);
            const double mhat = m / bc1, vhat = v / bc2;
            theta[i] = static_cast<T>(theta[i] - lr * mhat / (std::sqrt(vhat) + st.eps));
        }
    }
}

template <class T>
void zero_grads(ParamList<T>& params)
{
    for (auto& p : params) p.var.zero_grad();
}

struct CosineSchedule {
    double lr_initial = 4e-4;
    double floor_fraction = 2.5e-3;
    long total_steps = 1;

    double lr_final() const { return lr_initial * floor_fraction; }
};

// Cosine annealing from lr_initial down to lr_initial * floor_fraction.
inline double cosine_lr(long step, const CosineSchedule& s)
{
    if (s.total_steps <= 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
    if (step < 0 || step > s.total_steps) {
        throw std::out_of_range("cosine_lr: step " + std::to_string(step) + " outside [0," +
                                std::to_string(s.total_steps) + "]");
    }
    const double lf = s.lr_final();
    const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(s.total_steps);
    return lf + (s.lr_initial - lf) * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace eafnet::optim
