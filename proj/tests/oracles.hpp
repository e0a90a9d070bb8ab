#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner. They deliberately avoid the library's own helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <span>
#include <vector>

#include "auxol/aux_model.hpp"
#include "auxol/fusion.hpp"
#include "auxol/online_batch.hpp"
#include "auxol/rng.hpp"

namespace auxol::oracle {

struct GridBest {
    double alpha = 0.0;
    double dsc = -1.0;
};

inline double fused_dice_at(const LogitMap& s, const LogitMap& u, const Mask& y, double alpha) {
    long long tp = 0, pred = 0, truth = 0;
    for (int r = 0; r < s.height; ++r)
        for (int c = 0; c < s.width; ++c) {
            const double z = alpha * s(r, c) + (1.0 - alpha) * u(r, c);
            const bool fg = 1.0 / (1.0 + std::exp(-z)) > 0.5;
            pred += fg;
            truth += y(r, c) != 0;
            tp += fg && y(r, c);
        }
    if (pred + truth == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(pred + truth);
}

// Evaluates every grid point, then takes the first index holding the maximum.
inline GridBest exhaustive_alpha(const LogitMap& s, const LogitMap& u, const Mask& y, int points) {
    std::vector<double> scores;
    for (int i = 0; i < points; ++i) scores.push_back(fused_dice_at(s, u, y, static_cast<double>(i) / (points - 1)));
    const auto it = std::max_element(scores.begin(), scores.end());
    const auto idx = static_cast<int>(it - scores.begin());
    return {static_cast<double>(idx) / (points - 1), *it};
}

inline double hausdorff_brute(const Mask& a, const Mask& b) {
    std::vector<std::pair<int, int>> pa, pb;
    for (int r = 0; r < a.height; ++r)
        for (int c = 0; c < a.width; ++c) {
            if (a(r, c)) pa.push_back({r, c});
            if (b(r, c)) pb.push_back({r, c});
        }
    if (pa.empty() && pb.empty()) return 0.0;
    if (pa.empty() || pb.empty()) return std::sqrt(double((a.width - 1) * (a.width - 1) + (a.height - 1) * (a.height - 1)));
    auto directed = [](const auto& x, const auto& y) {
        double worst = 0.0;
        for (const auto& p : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : y) best = std::min(best, std::hypot(double(p.first - q.first), double(p.second - q.second)));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(pa, pb), directed(pb, pa));
}

// Direct evaluation of 1 - (2·Σpy + 1)/(Σp + Σy + 1).
inline double soft_dice_loss(std::span<const double> logits, const std::vector<std::uint8_t>& y) {
    double inter = 0.0, ps = 0.0, ys = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-logits[i]));
        inter += p * y[i];
        ps += p;
        ys += y[i];
    }
    return 1.0 - (2.0 * inter + 1.0) / (ps + ys + 1.0);
}

struct BatchPropertyReport {
    long long sequences = 0;
    long long admits = 0;
    long long evictions = 0;
    std::string failure;  // empty when every check held
};

// Randomized admit/refresh sequences checked against a brute-force model.
inline BatchPropertyReport check_online_batch(std::uint64_t seed, int sequences, std::initializer_list<std::size_t> ks) {
    BatchPropertyReport rep;
    Rng rng(seed);
    const std::vector<std::size_t> capacities(ks);
    for (int s = 0; s < sequences && rep.failure.empty(); ++s) {
        const std::size_t k = capacities[static_cast<std::size_t>(s) % capacities.size()];
        OnlineBatch<long long> batch(k);
        std::vector<long long> rejected;
        const int ops = rng.uniform_int(1, 4 * static_cast<int>(k) + 8);
        long long next_id = 0;
        auto fail = [&](const std::string& what) {
            if (rep.failure.empty()) rep.failure = "sequence " + std::to_string(s) + " (k=" + std::to_string(k) + "): " + what;
        };
        for (int op = 0; op < ops && rep.failure.empty(); ++op) {
            if (!batch.empty() && rng.bernoulli(0.15)) {
                std::vector<double> fresh(batch.size());
                for (auto& l : fresh) l = std::round(rng.uniform() * 20.0) / 20.0;
                batch.refresh_losses(fresh);
                for (std::size_t i = 0; i < fresh.size(); ++i)
                    if (batch.entries()[i].loss != fresh[i]) fail("refresh did not store the new losses");
                continue;
            }
            // coarse losses make ties common
            const double loss = std::round(rng.uniform() * 20.0) / 20.0;
            const long long id = next_id++;
            const auto before = batch.entries();
            double min_before = std::numeric_limits<double>::infinity();
            for (const auto& e : before) min_before = std::min(min_before, e.loss);

            const auto res = batch.admit({id, loss, static_cast<std::uint64_t>(id)});
            ++rep.admits;
            if (batch.size() > k) fail("length exceeds k");
            if (before.size() < k) {
                if (!res.admitted || res.evicted || batch.size() != before.size() + 1) fail("non-full batch must append");
            } else if (loss >= min_before) {
                if (!res.admitted || !res.evicted) fail("loss >= minimum must replace");
                else {
                    ++rep.evictions;
                    if (res.evicted->loss != min_before) fail("evicted entry was not a current minimum");
                }
            } else {
                if (res.admitted || res.evicted) fail("loss below minimum must be rejected");
                rejected.push_back(id);
            }
            for (const auto& e : batch.entries())
                if (std::find(rejected.begin(), rejected.end(), e.payload) != rejected.end()) fail("rejected entry present");
        }
        ++rep.sequences;
    }
    return rep;
}

struct FdReport {
    std::size_t checked = 0;
    std::size_t kinks = 0;
    double max_rel = 0.0;
    std::size_t worst_index = 0;
};

// ReLU pre-activation signs of every layer, used to spot coordinates where
// the finite-difference stencil straddles a kink.
inline std::vector<bool> activation_pattern(const AuxParams<double>& p, const std::vector<double>& patch) {
    const auto f = aux_forward<double>(p, patch);
    std::vector<bool> out;
    for (const auto* v : {&f.cache.enc1, &f.cache.enc2, &f.cache.mid, &f.cache.dec1, &f.cache.dec2})
        for (double x : *v) out.push_back(x > 0.0);
    return out;
}

inline double loss_at(const AuxParams<double>& p, const std::vector<double>& patch, const std::vector<std::uint8_t>& y) {
    const auto f = aux_forward<double>(p, patch);
    return soft_dice_loss(f.logits, y);
}

// Central differences over every parameter of a reduced net.
inline FdReport finite_difference_check(std::uint64_t seed, int patch = 16, std::array<int, 2> widths = {4, 6},
                                        int in_channels = 1, double h = 1e-4) {
    AuxConfig cfg{patch, in_channels, widths, seed};
    auto params = init_aux<double>(cfg);
    Rng rng(hash_seed({seed, 77}));
    for (auto& v : params.values) v += rng.normal(0.0, 0.05);  // non-zero biases too
    std::vector<double> x(cfg.patch_values());
    for (auto& v : x) v = rng.normal(0.0, 1.0);
    std::vector<std::uint8_t> y(cfg.output_values());
    for (int r = 0; r < patch; ++r)
        for (int c = 0; c < patch; ++c) y[r * patch + c] = (r - patch / 2) * (r - patch / 2) + (c - patch / 3) * (c - patch / 3) < patch * patch / 8;

    const auto f = aux_forward<double>(params, x);
    std::vector<double> dl(f.logits.size());
    dice_loss<double>(f.logits, y, dl);
    const auto grad = aux_backward<double>(params, f.cache, std::span<const double>(dl));

    FdReport rep;
    for (std::size_t i = 0; i < params.values.size(); ++i) {
        auto plus = params, minus = params;
        plus.values[i] += h;
        minus.values[i] -= h;
        if (activation_pattern(plus, x) != activation_pattern(minus, x)) {
            ++rep.kinks;
            continue;
        }
        const double numeric = (loss_at(plus, x, y) - loss_at(minus, x, y)) / (2.0 * h);
        const double rel = std::abs(grad[i] - numeric) / std::max({std::abs(grad[i]), std::abs(numeric), 1e-6});
        ++rep.checked;
        if (rel > rep.max_rel) {
            rep.max_rel = rel;
            rep.worst_index = i;
        }
    }
    return rep;
}

} // namespace auxol::oracle
