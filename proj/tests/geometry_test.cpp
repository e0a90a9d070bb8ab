#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "auxol/geometry.hpp"
#include "support.hpp"

using namespace auxol;
using auxol::test::filled_rect;

namespace {

long long cross3(Pixel o, Pixel a, Pixel b) {
    return static_cast<long long>(a.row - o.row) * (b.col - o.col) - static_cast<long long>(a.col - o.col) * (b.row - o.row);
}

bool on_segment(Pixel p, Pixel a, Pixel b) {
    return cross3(a, b, p) == 0 && std::min(a.row, b.row) <= p.row && p.row <= std::max(a.row, b.row) &&
           std::min(a.col, b.col) <= p.col && p.col <= std::max(a.col, b.col);
}

bool in_triangle(Pixel p, Pixel a, Pixel b, Pixel c) {
    if (cross3(a, b, c) == 0) return false;  // collinear triples are covered by on_segment
    const auto d1 = cross3(a, b, p), d2 = cross3(b, c, p), d3 = cross3(c, a, p);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

// Extreme points by exhaustion: p is a vertex unless it lies in a triangle or on a
// segment spanned by other foreground pixels.
std::set<std::pair<int, int>> brute_hull(const Mask& m) {
    std::vector<Pixel> pts;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m(r, c)) pts.push_back({r, c});
    std::set<std::pair<int, int>> out;
    const auto n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        bool interior = false;
        for (std::size_t a = 0; a < n && !interior; ++a) {
            if (a == i) continue;
            for (std::size_t b = a + 1; b < n && !interior; ++b) {
                if (b == i) continue;
                if (on_segment(pts[i], pts[a], pts[b])) interior = true;
                for (std::size_t c = b + 1; c < n && !interior; ++c)
                    if (c != i && in_triangle(pts[i], pts[a], pts[b], pts[c])) interior = true;
            }
        }
        if (!interior) out.insert({pts[i].row, pts[i].col});
    }
    return out;
}

std::set<std::pair<int, int>> as_set(const std::vector<Pixel>& v) {
    std::set<std::pair<int, int>> s;
    for (const auto& p : v) s.insert({p.row, p.col});
    return s;
}

bool inside_hull(const std::vector<Pixel>& hull, Pixel p) {
    if (hull.size() == 1) return hull[0].row == p.row && hull[0].col == p.col;
    if (hull.size() == 2) return on_segment(p, hull[0], hull[1]);
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto c = cross3(hull[i], hull[(i + 1) % hull.size()], p);
        pos |= c > 0;
        neg |= c < 0;
    }
    return !(pos && neg);
}

} // namespace

TEST(Binarize, SignRuleWithTiesToBackground) {
    LogitMap m(3, 1, std::vector<double>{3.0, -3.0, 0.0});
    const auto b = binarize(m, 0.0);
    EXPECT_EQ(b.values, (std::vector<std::uint8_t>{1, 0, 0}));
}

TEST(ConvexHull, SinglePixel) {
    Mask m(10, 10);
    m(5, 5) = 1;
    const auto h = convex_hull(m);
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0], (Pixel{5, 5}));
}

TEST(ConvexHull, Triangle) {
    Mask m(10, 10);
    m(0, 0) = m(0, 9) = m(9, 0) = 1;
    EXPECT_EQ(as_set(convex_hull(m)), (std::set<std::pair<int, int>>{{0, 0}, {0, 9}, {9, 0}}));
}

TEST(ConvexHull, FilledSquareMatchesBruteForce) {
    const auto m = filled_rect(12, 12, {1, 1, 11, 11});
    const auto expected = brute_hull(m);
    EXPECT_EQ(expected, (std::set<std::pair<int, int>>{{1, 1}, {1, 10}, {10, 1}, {10, 10}}));
    EXPECT_EQ(as_set(convex_hull(m)), expected);
}

TEST(ConvexHull, EmptyMaskThrows) { EXPECT_THROW(convex_hull(Mask(4, 4)), EmptyMask); }

TEST(ConvexHull, RandomMasksMatchBruteForceAndContainForeground) {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const int w = rng.uniform_int(1, 9), h = rng.uniform_int(1, 9);
        auto m = auxol::test::random_mask(rng, w, h, rng.uniform(0.05, 0.6));
        if (foreground_count(m) == 0) m(rng.uniform_int(0, h - 1), rng.uniform_int(0, w - 1)) = 1;
        const auto hull = convex_hull(m);
        EXPECT_EQ(as_set(hull), brute_hull(m)) << "trial " << trial;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                if (m(r, c)) EXPECT_TRUE(inside_hull(hull, {r, c})) << "trial " << trial;
    }
}

TEST(CropRect, BoxPassthrough) {
    const LogitMap s(100, 100, -6.0);
    EXPECT_EQ(prompt_to_crop_rect(Prompt::box({10, 10, 50, 50}), s, 0), (Rect{10, 10, 50, 50}));
}

TEST(CropRect, PointUsesHullOfGeneralistOutput) {
    LogitMap s(40, 40, -6.0);
    for (int r = 10; r <= 20; ++r)
        for (int c = 10; c <= 20; ++c) s(r, c) = 6.0;
    // oracle: bbox over the foreground pixels themselves
    Rect expect{40, 40, -1, -1};
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 40; ++c)
            if (s(r, c) > 0) {
                expect.row0 = std::min(expect.row0, r);
                expect.col0 = std::min(expect.col0, c);
                expect.row1 = std::max(expect.row1, r + 1);
                expect.col1 = std::max(expect.col1, c + 1);
            }
    const auto got = prompt_to_crop_rect(Prompt::point({15, 15}), s, 0);
    EXPECT_EQ(got, expect);
    EXPECT_EQ(got, (Rect{10, 10, 21, 21}));
}

TEST(CropRect, PointFallbackIsClampedAtBorder) {
    const LogitMap s(100, 100, -6.0);
    EXPECT_EQ(prompt_to_crop_rect(Prompt::point({4, 4}), s, 4, 32), (Rect{0, 0, 20, 20}));
}

TEST(CropRect, AlwaysInsideWithPositiveArea) {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const int w = rng.uniform_int(1, 40), h = rng.uniform_int(1, 40);
        const auto s = auxol::test::random_logits(rng, w, h, 3.0);
        const int pad = rng.uniform_int(0, 10), fb = rng.uniform_int(1, 64);
        Prompt p = Prompt::point({rng.uniform_int(0, h - 1), rng.uniform_int(0, w - 1)});
        if (rng.bernoulli(0.5)) {
            const int r0 = rng.uniform_int(0, h - 1), c0 = rng.uniform_int(0, w - 1);
            p = Prompt::box({r0, c0, rng.uniform_int(r0 + 1, h), rng.uniform_int(c0 + 1, w)});
        }
        const auto r = prompt_to_crop_rect(p, s, pad, fb);
        EXPECT_TRUE(r.positive_area() && r.inside(w, h));
    }
}

TEST(Crop, Examples) {
    LogitMap m(4, 4);
    for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = static_cast<double>(i);
    EXPECT_EQ(crop(m, {0, 0, 4, 4}), m);
    const auto one = crop(m, {3, 3, 4, 4});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one.values[0], m(3, 3));
    EXPECT_EQ(crop(m, {0, 0, 2, 2}).values, (std::vector<double>{0, 1, 4, 5}));
    EXPECT_THROW(crop(m, {2, 2, 5, 5}), InvalidArgument);
}

TEST(Resize, IdentityMidpointAndCorners) {
    Rng rng(1);
    const auto m = auxol::test::random_logits(rng, 7, 5, 1.0);
    EXPECT_EQ(resize_bilinear(m, 7, 5), m);

    const LogitMap x(2, 2, std::vector<double>{0, 1, 1, 0});
    EXPECT_DOUBLE_EQ(resize_bilinear(x, 3, 3)(1, 1), 0.5);

    const LogitMap y(2, 2, std::vector<double>{1, 2, 3, 4});
    const auto big = resize_bilinear(y, 4, 4);
    EXPECT_EQ(big(0, 0), 1);
    EXPECT_EQ(big(0, 3), 2);
    EXPECT_EQ(big(3, 0), 3);
    EXPECT_EQ(big(3, 3), 4);
}

TEST(PasteBack, Examples) {
    const LogitMap local(2, 2, 5.0);
    const auto full = paste_back(local, {1, 1, 3, 3}, 4, 4, -8.0);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) EXPECT_EQ(full(r, c), (r >= 1 && r < 3 && c >= 1 && c < 3) ? 5.0 : -8.0);

    const LogitMap y(2, 2, std::vector<double>{1, 2, 3, 4});
    EXPECT_EQ(paste_back(y, {0, 0, 4, 4}, 4, 4), resize_bilinear(y, 4, 4));
}

TEST(PasteBack, OutsideRectIsBackgroundAndCropRoundTrips) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = rng.uniform_int(2, 30), h = rng.uniform_int(2, 30);
        const int r0 = rng.uniform_int(0, h - 1), c0 = rng.uniform_int(0, w - 1);
        const Rect r{r0, c0, rng.uniform_int(r0 + 1, h), rng.uniform_int(c0 + 1, w)};
        const auto original = auxol::test::random_logits(rng, w, h, 4.0);
        const auto local = crop(original, r);
        const auto pasted = paste_back(local, r, w, h, -8.0);
        const auto b = binarize(pasted);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                if (r.contains({i, j})) EXPECT_EQ(pasted(i, j), original(i, j));
                else EXPECT_EQ(b(i, j), 0);
            }
    }
}
