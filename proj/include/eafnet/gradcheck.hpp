#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "eafnet/ops.hpp"

namespace eafnet::autograd {

struct GradCheckResult {
    double max_rel_error = 0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // elements whose every stencil straddled a kink
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0;
    double worst_numeric = 0;
};

enum class FdMethod {
    central,     // (f(x+h) - f(x-h)) / 2h
    five_point,  // fourth-order central stencil
    ridders,     // Richardson-extrapolated central differences over shrinking h
};

struct GradCheckOptions {
    double eps = 1e-5;  // step, or the initial step for ridders
    FdMethod method = FdMethod::central;
    // Shrink the step by 10x while the stencil changes a ReLU/max-pool branch;
    // elements still straddling a kink at min_eps are skipped.
    bool avoid_kinks = false;
    double min_eps = 1e-7;
    // Elements per input to probe; 0 checks every element.
    std::size_t max_elements_per_input = 0;
    std::uint64_t seed = 1;
};

// Ridders' method: a Neville tableau of central differences with step shrinking
// by 1.4, returning the entry with the smallest internal error estimate.
template <class F>
double ridders_derivative(F&& central, double h0, int ntab = 10)
{
    constexpr double con = 1.4, con2 = con * con, safe = 2.0;
    std::vector<std::vector<double>> a(static_cast<std::size_t>(ntab), std::vector<double>(static_cast<std::size_t>(ntab)));
    double h = h0, err = 1e300, ans = central(h);
    a[0][0] = ans;
    for (int i = 1; i < ntab; ++i) {
        h /= con;
        a[0][static_cast<std::size_t>(i)] = central(h);
        double fac = con2;
        for (int j = 1; j <= i; ++j) {
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            a[uj][ui] = (a[uj - 1][ui] * fac - a[uj - 1][ui - 1]) / (fac - 1.0);
            fac *= con2;
            const double e = std::max(std::abs(a[uj][ui] - a[uj - 1][ui]), std::abs(a[uj][ui] - a[uj - 1][ui - 1]));
            if (e <= err) {
                err = e;
                ans = a[uj][ui];
            }
        }
        const auto ui = static_cast<std::size_t>(i);
        if (std::abs(a[ui][ui] - a[ui - 1][ui - 1]) >= safe * err) break;
    }
    return ans;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

// Compares reverse-mode gradients of a scalar-valued closure against central
// differences, element by element, for every input in `inputs`.
template <class T>
GradCheckResult grad_check(const std::function<Var<T>(Graph<T>&)>& f, std::vector<Var<T>> inputs,
                           const GradCheckOptions& opt = {})
{
    for (auto& v : inputs) {
        v.set_requires_grad(true);
        v.zero_grad();
    }
    Graph<T> g;
    Var<T> out = f(g);
    if (out.value().numel() != 1) throw std::invalid_argument("grad_check: closure must return a scalar");
    g.backward(out);
    std::vector<Tensor<T>> analytic;
    for (auto& v : inputs) analytic.push_back(v.grad());

    auto eval = [&f] {
        Graph<T> ng(false);
        return static_cast<double>(f(ng).value()[0]);
    };

    GradCheckResult r;
    std::mt19937_64 rng(opt.seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor<T>& val = inputs[k].value();
        std::vector<std::size_t> idx(val.numel());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (opt.max_elements_per_input && idx.size() > opt.max_elements_per_input) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(opt.max_elements_per_input);
        }
        for (std::size_t i : idx) {
            const T saved = val[i];
            std::uint64_t base_sig = 0, sig = 0;
            bool crossed = false;
            if (opt.avoid_kinks) {
                kink_probe::signature = &base_sig;
                eval();
                kink_probe::signature = nullptr;
            }
            auto at = [&](double h) {
                val[i] = static_cast<T>(saved + h);
                if (opt.avoid_kinks) {
                    sig = 0;
                    kink_probe::signature = &sig;
                }
                const double v = eval();
                kink_probe::signature = nullptr;
                val[i] = saved;
                if (opt.avoid_kinks && sig != base_sig) crossed = true;
                return v;
            };
            double h = opt.eps;
            double numeric = 0;
            for (;;) {
                crossed = false;
                switch (opt.method) {
                    case FdMethod::central: numeric = (at(h) - at(-h)) / (2 * h); break;
                    case FdMethod::five_point:
                        numeric = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
                        break;
                    case FdMethod::ridders:
                        numeric = ridders_derivative([&](double d) { return (at(d) - at(-d)) / (2 * d); }, h);
                        break;
                }
                if (!crossed || h * 0.1 < opt.min_eps) break;
                h *= 0.1;
            }
            if (crossed) {
                ++r.skipped;
                continue;
            }
            const double a = analytic[k][i];
            const double e = relative_error(a, numeric);
            ++r.checked;
            if (e > r.max_rel_error) {
                r.max_rel_error = e;
                r.worst_input = k;
                r.worst_index = i;
                r.worst_analytic = a;
                r.worst_numeric = numeric;
            }
        }
    }
    return r;
}

// Fixed pseudo-random projection weights for reducing a tensor to a scalar.
template <class T>
Tensor<T> projection_weights(const Shape& shape, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Tensor<T> w(shape);
    for (T& v : w.storage()) v = static_cast<T>(nd(rng));
    return w;
}

template <class T>
Tensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> ud(lo, hi);
    Tensor<T> t(shape);
    for (T& v : t.storage()) v = static_cast<T>(ud(rng));
    return t;
}

}  // namespace eafnet::autograd
