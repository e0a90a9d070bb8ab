#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "auxol/grid.hpp"

namespace auxol {

inline constexpr double kDefaultThreshold = 0.0;
inline constexpr int kDefaultCropPad = 4;
inline constexpr int kDefaultFallbackSize = 32;
inline constexpr double kDefaultPasteFill = -8.0;

/// Foreground iff logit > threshold; ties go to background.
inline Mask binarize(const LogitMap& m, double threshold = kDefaultThreshold) {
    Mask out(m.width, m.height);
    for (std::size_t i = 0; i < m.size(); ++i) out.values[i] = m.values[i] > threshold ? 1 : 0;
    return out;
}

namespace detail {

inline long long cross(Pixel o, Pixel a, Pixel b) {
    return static_cast<long long>(a.row - o.row) * (b.col - o.col) -
           static_cast<long long>(a.col - o.col) * (b.row - o.row);
}

} // namespace detail

/// Convex hull of all foreground pixel centers (Andrew's monotone chain).
/// Vertices are counter-clockwise in (row, col) coordinates, collinear points dropped.
inline std::vector<Pixel> convex_hull(const Mask& m) {
    // Only the leftmost and rightmost pixel of each row can be hull vertices.
    std::vector<Pixel> pts;
    for (int r = 0; r < m.height; ++r) {
        int lo = -1, hi = -1;
        for (int c = 0; c < m.width; ++c) {
            if (m(r, c)) {
                if (lo < 0) lo = c;
                hi = c;
            }
        }
        if (lo >= 0) {
            pts.push_back({r, lo});
            if (hi != lo) pts.push_back({r, hi});
        }
    }
    if (pts.empty()) throw EmptyMask("convex_hull: mask has no foreground pixel");
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    std::vector<Pixel> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

/// Tight half-open bounding rect of a vertex set.
inline Rect bounding_rect(const std::vector<Pixel>& pts) {
    if (pts.empty()) throw EmptyMask("bounding_rect: no points");
    Rect r{pts[0].row, pts[0].col, pts[0].row + 1, pts[0].col + 1};
    for (const auto& p : pts) {
        r.row0 = std::min(r.row0, p.row);
        r.col0 = std::min(r.col0, p.col);
        r.row1 = std::max(r.row1, p.row + 1);
        r.col1 = std::max(r.col1, p.col + 1);
    }
    return r;
}

/// Crop window for the specialist. Box prompts use the box itself; point prompts
/// use the bounding box of the convex hull of the binarized generalist output,
/// falling back to a square centered on the point when that output is empty.
inline Rect prompt_to_crop_rect(const Prompt& prompt, const LogitMap& generalist_output, int pad = kDefaultCropPad,
                                int fallback_size = kDefaultFallbackSize) {
    const int w = generalist_output.width, h = generalist_output.height;
    if (!prompt.valid_for(w, h)) throw InvalidArgument("prompt_to_crop_rect: prompt outside image bounds");
    if (pad < 0 || fallback_size < 1) throw InvalidArgument("prompt_to_crop_rect: bad pad or fallback size");

    if (prompt.kind() == PromptKind::Box) return prompt.rect().expanded(pad).clamped(w, h);

    const Mask fg = binarize(generalist_output);
    if (foreground_count(fg) == 0) {
        const Pixel p = prompt.pixel();
        const int half = fallback_size / 2;
        Rect r{p.row - half, p.col - half, p.row - half + fallback_size, p.col - half + fallback_size};
        return r.clamped(w, h);
    }
    return bounding_rect(convex_hull(fg)).expanded(pad).clamped(w, h);
}

template <class T>
Grid<T> crop(const Grid<T>& m, const Rect& r) {
    if (!r.positive_area() || !r.inside(m.width, m.height)) throw InvalidArgument("crop: rect outside map bounds");
    Grid<T> out(r.width(), r.height());
    for (int row = 0; row < out.height; ++row)
        std::copy_n(&m(r.row0 + row, r.col0), out.width, &out(row, 0));
    return out;
}

namespace detail {

struct Tap {
    int i0, i1;
    double frac;
};

// Corner-aligned source coordinate for output index i.
inline Tap bilinear_tap(int i, int in, int out) {
    if (in == 1) return {0, 0, 0.0};
    const double src = out == 1 ? (in - 1) / 2.0 : static_cast<double>(i) * (in - 1) / (out - 1);
    int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    int i1 = std::min(i0 + 1, in - 1);
    return {i0, i1, src - i0};
}

} // namespace detail

/// Corner-aligned bilinear resize; the four corner samples are preserved exactly.
inline Grid<double> resize_bilinear(const Grid<double>& m, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw InvalidArgument("resize_bilinear: output size must be positive");
    if (m.empty()) throw InvalidArgument("resize_bilinear: empty input");
    if (out_w == m.width && out_h == m.height) return m;

    std::vector<detail::Tap> cols(out_w);
    for (int c = 0; c < out_w; ++c) cols[c] = detail::bilinear_tap(c, m.width, out_w);

    Grid<double> out(out_w, out_h);
    for (int r = 0; r < out_h; ++r) {
        const auto tr = detail::bilinear_tap(r, m.height, out_h);
        for (int c = 0; c < out_w; ++c) {
            const auto& tc = cols[c];
            const double top = m(tr.i0, tc.i0) * (1.0 - tc.frac) + (tc.frac > 0 ? m(tr.i0, tc.i1) * tc.frac : 0.0);
            if (tr.frac == 0.0) {
                out(r, c) = top;
                continue;
            }
            const double bot = m(tr.i1, tc.i0) * (1.0 - tc.frac) + (tc.frac > 0 ? m(tr.i1, tc.i1) * tc.frac : 0.0);
            out(r, c) = top * (1.0 - tr.frac) + bot * tr.frac;
        }
    }
    return out;
}

/// Resize a binary mask through bilinear interpolation, foreground iff > 0.5.
inline Mask resize_mask(const Mask& m, int out_w, int out_h) {
    Grid<double> g(m.width, m.height);
    for (std::size_t i = 0; i < m.size(); ++i) g.values[i] = m.values[i] ? 1.0 : 0.0;
    const auto r = resize_bilinear(g, out_w, out_h);
    Mask out(out_w, out_h);
    for (std::size_t i = 0; i < r.size(); ++i) out.values[i] = r.values[i] > 0.5 ? 1 : 0;
    return out;
}

/// Lift crop-local logits back to full resolution; pixels outside `r` get `fill`.
inline LogitMap paste_back(const LogitMap& local, const Rect& r, int full_w, int full_h,
                           double fill = kDefaultPasteFill) {
    if (!r.positive_area() || !r.inside(full_w, full_h)) throw InvalidArgument("paste_back: rect outside target bounds");
    const auto resized = resize_bilinear(local, r.width(), r.height());
    LogitMap out(full_w, full_h, fill);
    for (int row = 0; row < resized.height; ++row)
        std::copy_n(&resized(row, 0), resized.width, &out(r.row0 + row, r.col0));
    return out;
}

} // namespace auxol
