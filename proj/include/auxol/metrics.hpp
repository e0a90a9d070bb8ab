#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "auxol/grid.hpp"

namespace auxol {

inline constexpr double kDiceSmoothing = 1.0;

/// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
inline double dice_coefficient(const Mask& a, const Mask& b) {
    require_same_shape(a, b, "dice_coefficient");
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a.values[i] != 0, y = b.values[i] != 0;
        na += x;
        nb += y;
        inter += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

template <class T>
inline T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

/// Soft Dice loss on sigmoid(logits) with its exact gradient w.r.t. the logits.
/// `grad` receives dloss/dlogit per pixel; returns the loss.
template <class T>
double dice_loss(std::span<const T> logits, std::span<const std::uint8_t> target, std::span<T> grad,
                 double eps = kDiceSmoothing) {
    if (logits.size() != target.size() || grad.size() != logits.size())
        throw DimensionMismatch("dice_loss: logits/target/grad sizes differ");
    thread_local std::vector<double> probs;
    probs.resize(logits.size());
    double inter = 0.0, psum = 0.0, ysum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = sigmoid(static_cast<double>(logits[i]));
        const double y = target[i] ? 1.0 : 0.0;
        probs[i] = p;
        inter += p * y;
        psum += p;
        ysum += y;
    }
    const double num = 2.0 * inter + eps;
    const double den = psum + ysum + eps;
    // dL/dp_i = -(2 y_i den - num) / den^2
    const double inv_den2 = 1.0 / (den * den);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = probs[i];
        const double y = target[i] ? 1.0 : 0.0;
        const double dp = -(2.0 * y * den - num) * inv_den2;
        grad[i] = static_cast<T>(dp * p * (1.0 - p));
    }
    return 1.0 - num / den;
}

struct DiceLossResult {
    double loss = 0.0;
    LogitMap grad;
};

inline DiceLossResult dice_loss(const LogitMap& logits, const Mask& target, double eps = kDiceSmoothing) {
    require_same_shape(logits, target, "dice_loss");
    DiceLossResult r{0.0, LogitMap(logits.width, logits.height)};
    r.loss = dice_loss<double>(logits.values, target.values, r.grad.values, eps);
    return r;
}

enum class HausdorffVariant { Exact, Percentile95 };

namespace detail {

inline std::vector<Pixel> foreground_pixels(const Mask& m) {
    std::vector<Pixel> out;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m(r, c)) out.push_back({r, c});
    return out;
}

// Foreground pixels with a 4-neighbour outside the set (or on the image edge).
// The nearest set pixel to any point outside the set is always one of these.
inline std::vector<Pixel> boundary_pixels(const Mask& m) {
    std::vector<Pixel> out;
    auto bg = [&](int r, int c) { return r < 0 || c < 0 || r >= m.height || c >= m.width || !m(r, c); };
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m(r, c) && (bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1))) out.push_back({r, c});
    return out;
}

// Distances from every foreground pixel of `a` to the nearest foreground pixel of `b`.
inline std::vector<double> directed_distances(const Mask& a, const Mask& b) {
    const auto edge = boundary_pixels(b);
    std::vector<double> out;
    for (int r = 0; r < a.height; ++r) {
        for (int c = 0; c < a.width; ++c) {
            if (!a(r, c)) continue;
            if (b(r, c)) {
                out.push_back(0.0);
                continue;
            }
            long long best = std::numeric_limits<long long>::max();
            for (const auto& p : edge) {
                const long long dr = p.row - r, dc = p.col - c;
                best = std::min(best, dr * dr + dc * dc);
            }
            out.push_back(std::sqrt(static_cast<double>(best)));
        }
    }
    return out;
}

inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

} // namespace detail

/// Symmetric Hausdorff distance between foreground sets (Euclidean, pixels).
/// Both empty → 0; exactly one empty → the image diagonal.
inline double hausdorff_distance(const Mask& a, const Mask& b, HausdorffVariant variant = HausdorffVariant::Exact) {
    require_same_shape(a, b, "hausdorff_distance");
    const auto na = foreground_count(a), nb = foreground_count(b);
    if (na == 0 && nb == 0) return 0.0;
    if (na == 0 || nb == 0) return std::hypot(static_cast<double>(a.width - 1), static_cast<double>(a.height - 1));

    auto ab = detail::directed_distances(a, b);
    auto ba = detail::directed_distances(b, a);
    if (variant == HausdorffVariant::Exact)
        return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
    return std::max(detail::percentile(std::move(ab), 0.95), detail::percentile(std::move(ba), 0.95));
}

} // namespace auxol
