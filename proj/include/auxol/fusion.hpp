#pragma once

#include <cstddef>
#include <deque>
#include <numeric>
#include <string>

#include "auxol/grid.hpp"
#include "auxol/metrics.hpp"

namespace auxol {

inline constexpr double kDefaultAlpha = 0.5;
inline constexpr int kDefaultGridPoints = 101;
inline constexpr std::size_t kDefaultTrackerWindow = 5;

struct FusionResult {
    Grid<double> prob;
    Mask mask;
};

inline void require_alpha(double alpha, const char* where) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw AlphaOutOfRange(std::string(where) + ": alpha " + std::to_string(alpha));
}

/// sigmoid(alpha*s + (1-alpha)*u), foreground iff the probability exceeds 0.5.
inline FusionResult fuse(const LogitMap& s, const LogitMap& u, double alpha) {
    require_same_shape(s, u, "fuse");
    require_alpha(alpha, "fuse");
    FusionResult r{Grid<double>(s.width, s.height), Mask(s.width, s.height)};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double p = sigmoid(alpha * s.values[i] + (1.0 - alpha) * u.values[i]);
        r.prob.values[i] = p;
        r.mask.values[i] = p > 0.5 ? 1 : 0;
    }
    return r;
}

struct AlphaSearchResult {
    double alpha_star = 0.0;
    double best_dsc = 0.0;
};

/// Exhaustive search of alpha on {i/(n-1)} maximizing the Dice score of the fused
/// mask against `y`. Ties resolve to the smallest alpha.
inline AlphaSearchResult optimal_alpha(const LogitMap& s, const LogitMap& u, const Mask& y,
                                       int grid_points = kDefaultGridPoints) {
    require_same_shape(s, u, "optimal_alpha");
    require_same_shape(s, y, "optimal_alpha");
    if (grid_points < 2) throw InvalidArgument("optimal_alpha: grid_points must be >= 2");

    std::size_t ny = foreground_count(y);
    AlphaSearchResult best{0.0, -1.0};
    for (int i = 0; i < grid_points; ++i) {
        const double alpha = static_cast<double>(i) / static_cast<double>(grid_points - 1);
        std::size_t inter = 0, nf = 0;
        for (std::size_t p = 0; p < s.size(); ++p) {
            const bool fg = sigmoid(alpha * s.values[p] + (1.0 - alpha) * u.values[p]) > 0.5;
            nf += fg;
            inter += fg && y.values[p];
        }
        const double dsc = nf + ny == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(nf + ny);
        if (dsc > best.best_dsc) best = {alpha, dsc};
    }
    return best;
}

/// Running mean of the most recent optimal alphas.
class AlphaTracker {
public:
    explicit AlphaTracker(std::size_t capacity = kDefaultTrackerWindow, double default_alpha = kDefaultAlpha)
        : capacity_(capacity), default_alpha_(default_alpha) {
        if (capacity_ == 0) throw InvalidArgument("AlphaTracker: capacity must be >= 1");
        require_alpha(default_alpha_, "AlphaTracker");
    }

    double alpha() const {
        if (window_.empty()) return default_alpha_;
        return std::accumulate(window_.begin(), window_.end(), 0.0) / static_cast<double>(window_.size());
    }

    void push(double alpha_star) {
        require_alpha(alpha_star, "AlphaTracker::push");
        window_.push_back(alpha_star);
        if (window_.size() > capacity_) window_.pop_front();
    }

    const std::deque<double>& window() const noexcept { return window_; }
    std::size_t capacity() const noexcept { return capacity_; }

private:
    std::size_t capacity_;
    double default_alpha_;
    std::deque<double> window_;
};

} // namespace auxol
