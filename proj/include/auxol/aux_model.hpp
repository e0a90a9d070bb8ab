#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "auxol/errors.hpp"
#include "auxol/metrics.hpp"
#include "auxol/rng.hpp"

namespace auxol {

struct AuxConfig {
    int patch_size = 64;
    int in_channels = 1;
    std::array<int, 2> widths{16, 32};
    std::uint64_t seed = 0;

    void validate() const {
        if (patch_size < 16 || (patch_size & (patch_size - 1)) != 0)
            throw InvalidArgument("AuxConfig: patch_size must be a power of two >= 16");
        if (in_channels != 1 && in_channels != 2) throw InvalidArgument("AuxConfig: in_channels must be 1 or 2");
        if (widths[0] < 1 || widths[1] < 1) throw InvalidArgument("AuxConfig: widths must be positive");
    }

    std::size_t patch_values() const { return static_cast<std::size_t>(in_channels) * patch_size * patch_size; }
    std::size_t output_values() const { return static_cast<std::size_t>(patch_size) * patch_size; }

    bool operator==(const AuxConfig&) const = default;
};

struct ConvLayer {
    int in = 0;
    int out = 0;
    int kernel = 3;
    int stride = 1;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    std::size_t weight_count() const { return static_cast<std::size_t>(out) * in * kernel * kernel; }
};

enum LayerId : std::size_t { kEnc1, kEnc2, kBottleneck, kDec1, kDec2, kHead, kLayerCount };

/// Miniature U-Net:
///   enc1  3x3/2  in      -> w0        (P/2)
///   enc2  3x3/2  w0      -> w1        (P/4)
///   mid   3x3    w1      -> w1        (P/4)
///   dec1  3x3    up(mid) ++ enc1 -> w1 (P/2)
///   dec2  3x3    up(dec1) -> w0        (P)
///   head  1x1    w0      -> 1         (P), no ReLU
inline std::array<ConvLayer, kLayerCount> aux_layers(const AuxConfig& cfg) {
    const int w0 = cfg.widths[0], w1 = cfg.widths[1];
    std::array<ConvLayer, kLayerCount> layers{{
        {cfg.in_channels, w0, 3, 2},
        {w0, w1, 3, 2},
        {w1, w1, 3, 1},
        {w1 + w0, w1, 3, 1},
        {w1, w0, 3, 1},
        {w0, 1, 1, 1},
    }};
    std::size_t offset = 0;
    for (auto& l : layers) {
        l.weight_offset = offset;
        offset += l.weight_count();
        l.bias_offset = offset;
        offset += static_cast<std::size_t>(l.out);
    }
    return layers;
}

inline std::size_t aux_parameter_count(const AuxConfig& cfg) {
    const auto layers = aux_layers(cfg);
    return layers.back().bias_offset + static_cast<std::size_t>(layers.back().out);
}

// Eigen's vectorized kernels peel by runtime alignment, so buffers need a fixed
// alignment for bitwise reproducible results.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <class T>
struct AuxParams {
    AuxConfig config;
    AlignedVector<T> values;

    std::uint64_t fingerprint() const noexcept { return fnv1a64(std::as_bytes(std::span(values))); }
    bool operator==(const AuxParams&) const = default;
};

/// He-style fan-in scaled normal weights, zero biases.
template <class T>
AuxParams<T> init_aux(const AuxConfig& cfg) {
    cfg.validate();
    AuxParams<T> p{cfg, AlignedVector<T>(aux_parameter_count(cfg), T(0))};
    Rng rng(hash_seed({cfg.seed, 0xa0c5ULL}));
    for (const auto& l : aux_layers(cfg)) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(l.in * l.kernel * l.kernel));
        for (std::size_t i = 0; i < l.weight_count(); ++i)
            p.values[l.weight_offset + i] = static_cast<T>(rng.normal(0.0, stddev));
    }
    return p;
}

template <class T>
struct AuxCache {
    std::uint64_t params_fingerprint = 0;
    AlignedVector<T> input, enc1, enc2, mid, dec1_in, dec1, dec2_in, dec2;
};

template <class T>
struct AuxForward {
    AlignedVector<T> logits;  // patch_size * patch_size, row-major
    AuxCache<T> cache;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// cols[(c*k + ky)*k + kx][oy*wo + ox] = in[c][oy*s + ky - pad][ox*s + kx - pad]
template <class T>
void im2col(const T* in, int channels, int h, int w, int k, int stride, int ho, int wo, T* cols) {
    const int pad = (k - 1) / 2;
    for (int c = 0; c < channels; ++c) {
        const T* plane = in + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    T* dst = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill_n(dst, wo, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im(const T* cols, int channels, int h, int w, int k, int stride, int ho, int wo, T* out) {
    const int pad = (k - 1) / 2;
    std::fill_n(out, static_cast<std::size_t>(channels) * h * w, T(0));
    for (int c = 0; c < channels; ++c) {
        T* plane = out + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    const T* src = row + static_cast<std::size_t>(oy) * wo;
                    T* dst = plane + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

template <class T>
AlignedVector<T> conv_forward(const ConvLayer& l, const T* params, const AlignedVector<T>& in, int h, int w, bool relu) {
    const int ho = (h + 2 * ((l.kernel - 1) / 2) - l.kernel) / l.stride + 1;
    const int wo = (w + 2 * ((l.kernel - 1) / 2) - l.kernel) / l.stride + 1;
    const Eigen::Index kk = static_cast<Eigen::Index>(l.in) * l.kernel * l.kernel;
    const Eigen::Index n = static_cast<Eigen::Index>(ho) * wo;

    AlignedVector<T> out(static_cast<std::size_t>(l.out) * n);
    Eigen::Map<const RowMat<T>> W(params + l.weight_offset, l.out, kk);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(params + l.bias_offset, l.out);
    Eigen::Map<RowMat<T>> O(out.data(), l.out, n);

    if (l.kernel == 1 && l.stride == 1) {
        O.noalias() = W * Eigen::Map<const RowMat<T>>(in.data(), kk, n);
    } else {
        thread_local AlignedVector<T> cols;
        cols.resize(static_cast<std::size_t>(kk * n));
        im2col(in.data(), l.in, h, w, l.kernel, l.stride, ho, wo, cols.data());
        O.noalias() = W * Eigen::Map<const RowMat<T>>(cols.data(), kk, n);
    }
    O.colwise() += b;
    if (relu) O = O.cwiseMax(T(0));
    return out;
}

// Accumulates weight/bias gradients into `grad` and returns dL/d(input).
template <class T>
AlignedVector<T> conv_backward(const ConvLayer& l, const T* params, const AlignedVector<T>& in, int h, int w,
                             const AlignedVector<T>& dout, T* grad, bool need_dinput = true) {
    const int ho = (h + 2 * ((l.kernel - 1) / 2) - l.kernel) / l.stride + 1;
    const int wo = (w + 2 * ((l.kernel - 1) / 2) - l.kernel) / l.stride + 1;
    const Eigen::Index kk = static_cast<Eigen::Index>(l.in) * l.kernel * l.kernel;
    const Eigen::Index n = static_cast<Eigen::Index>(ho) * wo;

    Eigen::Map<const RowMat<T>> W(params + l.weight_offset, l.out, kk);
    Eigen::Map<const RowMat<T>> dO(dout.data(), l.out, n);
    Eigen::Map<RowMat<T>> dW(grad + l.weight_offset, l.out, kk);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grad + l.bias_offset, l.out);
    db += dO.rowwise().sum();

    AlignedVector<T> din;
    if (l.kernel == 1 && l.stride == 1) {
        Eigen::Map<const RowMat<T>> X(in.data(), kk, n);
        dW.noalias() += dO * X.transpose();
        if (need_dinput) {
            din.resize(static_cast<std::size_t>(kk * n));
            Eigen::Map<RowMat<T>>(din.data(), kk, n).noalias() = W.transpose() * dO;
        }
        return din;
    }
    thread_local AlignedVector<T> cols;
    cols.resize(static_cast<std::size_t>(kk * n));
    im2col(in.data(), l.in, h, w, l.kernel, l.stride, ho, wo, cols.data());
    dW.noalias() += dO * Eigen::Map<const RowMat<T>>(cols.data(), kk, n).transpose();
    if (need_dinput) {
        Eigen::Map<RowMat<T>>(cols.data(), kk, n).noalias() = W.transpose() * dO;
        din.resize(static_cast<std::size_t>(l.in) * h * w);
        col2im(cols.data(), l.in, h, w, l.kernel, l.stride, ho, wo, din.data());
    }
    return din;
}

template <class T>
AlignedVector<T> upsample2(const AlignedVector<T>& in, int channels, int h, int w) {
    AlignedVector<T> out(static_cast<std::size_t>(channels) * 4 * h * w);
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < 2 * h; ++y) {
            const T* src = in.data() + (static_cast<std::size_t>(c) * h + y / 2) * w;
            T* dst = out.data() + (static_cast<std::size_t>(c) * 2 * h + y) * 2 * w;
            for (int x = 0; x < 2 * w; ++x) dst[x] = src[x / 2];
        }
    return out;
}

// Adjoint of upsample2: sums each 2x2 block.
template <class T>
AlignedVector<T> upsample2_backward(const T* dout, int channels, int h, int w) {
    AlignedVector<T> din(static_cast<std::size_t>(channels) * h * w, T(0));
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < 2 * h; ++y) {
            const T* src = dout + (static_cast<std::size_t>(c) * 2 * h + y) * 2 * w;
            T* dst = din.data() + (static_cast<std::size_t>(c) * h + y / 2) * w;
            for (int x = 0; x < 2 * w; ++x) dst[x / 2] += src[x];
        }
    return din;
}

template <class T>
void relu_backward(AlignedVector<T>& grad, const AlignedVector<T>& activation) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(activation[i] > T(0))) grad[i] = T(0);
}

} // namespace detail

/// Forward pass over one patch laid out channel-major (C x P x P).
template <class T>
AuxForward<T> aux_forward(const AuxParams<T>& params, std::span<const T> patch) {
    const auto& cfg = params.config;
    if (patch.size() != cfg.patch_values())
        throw ShapeMismatch("aux_forward: expected " + std::to_string(cfg.patch_values()) + " values, got " +
                            std::to_string(patch.size()));
    if (params.values.size() != aux_parameter_count(cfg)) throw ShapeMismatch("aux_forward: parameter count mismatch");

    const auto layers = aux_layers(cfg);
    const T* w = params.values.data();
    const int p = cfg.patch_size, p2 = p / 2, p4 = p / 4;
    const int w1 = cfg.widths[1];

    AuxForward<T> f;
    auto& c = f.cache;
    c.params_fingerprint = params.fingerprint();
    c.input.assign(patch.begin(), patch.end());
    c.enc1 = detail::conv_forward(layers[kEnc1], w, c.input, p, p, true);
    c.enc2 = detail::conv_forward(layers[kEnc2], w, c.enc1, p2, p2, true);
    c.mid = detail::conv_forward(layers[kBottleneck], w, c.enc2, p4, p4, true);
    c.dec1_in = detail::upsample2(c.mid, w1, p4, p4);
    c.dec1_in.insert(c.dec1_in.end(), c.enc1.begin(), c.enc1.end());
    c.dec1 = detail::conv_forward(layers[kDec1], w, c.dec1_in, p2, p2, true);
    c.dec2_in = detail::upsample2(c.dec1, w1, p2, p2);
    c.dec2 = detail::conv_forward(layers[kDec2], w, c.dec2_in, p, p, true);
    f.logits = detail::conv_forward(layers[kHead], w, c.dec2, p, p, false);
    return f;
}

/// Exact gradient of a scalar loss w.r.t. every parameter, given dloss/dlogit.
template <class T>
AlignedVector<T> aux_backward(const AuxParams<T>& params, const AuxCache<T>& cache, std::span<const T> loss_grad) {
    const auto& cfg = params.config;
    if (cache.params_fingerprint != params.fingerprint())
        throw StaleCache("aux_backward: cache was produced with different parameters");
    if (loss_grad.size() != cfg.output_values()) throw ShapeMismatch("aux_backward: loss gradient has wrong size");

    const auto layers = aux_layers(cfg);
    const T* w = params.values.data();
    const int p = cfg.patch_size, p2 = p / 2, p4 = p / 4;
    const int w1 = cfg.widths[1];
    AlignedVector<T> grad(params.values.size(), T(0));

    AlignedVector<T> dlogits(loss_grad.begin(), loss_grad.end());
    auto d_dec2 = detail::conv_backward(layers[kHead], w, cache.dec2, p, p, dlogits, grad.data());
    detail::relu_backward(d_dec2, cache.dec2);
    auto d_dec2_in = detail::conv_backward(layers[kDec2], w, cache.dec2_in, p, p, d_dec2, grad.data());
    auto d_dec1 = detail::upsample2_backward(d_dec2_in.data(), w1, p2, p2);
    detail::relu_backward(d_dec1, cache.dec1);
    auto d_dec1_in = detail::conv_backward(layers[kDec1], w, cache.dec1_in, p2, p2, d_dec1, grad.data());

    auto d_mid = detail::upsample2_backward(d_dec1_in.data(), w1, p4, p4);
    AlignedVector<T> d_enc1(d_dec1_in.begin() + static_cast<std::ptrdiff_t>(w1) * p2 * p2, d_dec1_in.end());

    detail::relu_backward(d_mid, cache.mid);
    auto d_enc2 = detail::conv_backward(layers[kBottleneck], w, cache.enc2, p4, p4, d_mid, grad.data());
    detail::relu_backward(d_enc2, cache.enc2);
    auto d_enc1_b = detail::conv_backward(layers[kEnc2], w, cache.enc1, p2, p2, d_enc2, grad.data());
    for (std::size_t i = 0; i < d_enc1.size(); ++i) d_enc1[i] += d_enc1_b[i];
    detail::relu_backward(d_enc1, cache.enc1);
    detail::conv_backward(layers[kEnc1], w, cache.input, p, p, d_enc1, grad.data(), false);
    return grad;
}

template <class T>
struct TrainingPair {
    std::span<const T> patch;
    std::span<const std::uint8_t> target;
};

template <class T>
struct BatchGradient {
    std::vector<double> losses;  // per-pair Dice loss before the update
    double mean_loss = 0.0;
    AlignedVector<T> grad;         // gradient of the mean loss
};

/// Forward/backward over every pair; the gradient is the mean of per-pair gradients.
template <class T>
BatchGradient<T> batch_gradient(const AuxParams<T>& params, std::span<const TrainingPair<T>> pairs) {
    if (pairs.empty()) throw EmptyBatch("batch_gradient: no training pairs");
    BatchGradient<T> out;
    std::vector<double> acc(params.values.size(), 0.0);
    AlignedVector<T> dlogits(params.config.output_values());
    for (const auto& pair : pairs) {
        if (pair.target.size() != params.config.output_values()) throw ShapeMismatch("batch_gradient: target size");
        auto f = aux_forward(params, pair.patch);
        out.losses.push_back(dice_loss<T>(f.logits, pair.target, dlogits));
        const auto g = aux_backward(params, f.cache, std::span<const T>(dlogits));
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += static_cast<double>(g[i]);
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    out.grad.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out.grad[i] = static_cast<T>(acc[i] * inv);
    for (double l : out.losses) out.mean_loss += l;
    out.mean_loss *= inv;
    return out;
}

} // namespace auxol
