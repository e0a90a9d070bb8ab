#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "auxol/errors.hpp"

namespace auxol {

struct AdamWHyper {
    double lr = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    bool operator==(const AdamWHyper&) const = default;
};

template <class T>
struct OptimizerState {
    AdamWHyper hyper;
    std::vector<T> m;
    std::vector<T> v;
    std::uint64_t step = 0;

    OptimizerState() = default;
    OptimizerState(std::size_t n, AdamWHyper h = {}) : hyper(h), m(n, T(0)), v(n, T(0)) {}

    bool operator==(const OptimizerState&) const = default;
};

/// Bias-corrected Adam moments with decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
template <class T>
void adamw_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& st) {
    if (params.size() != grads.size() || st.m.size() != params.size() || st.v.size() != params.size())
        throw ShapeMismatch("adamw_step: params, grads and moments must have equal length");
    const auto& h = st.hyper;
    ++st.step;
    const double t = static_cast<double>(st.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = static_cast<double>(grads[i]);
        const double m = h.beta1 * static_cast<double>(st.m[i]) + (1.0 - h.beta1) * g;
        const double v = h.beta2 * static_cast<double>(st.v[i]) + (1.0 - h.beta2) * g * g;
        st.m[i] = static_cast<T>(m);
        st.v[i] = static_cast<T>(v);
        const double p = static_cast<double>(params[i]);
        const double update = (m / c1) / (std::sqrt(v / c2) + h.eps) + h.weight_decay * p;
        params[i] = static_cast<T>(p - h.lr * update);
    }
}

} // namespace auxol
