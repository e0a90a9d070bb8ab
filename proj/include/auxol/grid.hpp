#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "auxol/errors.hpp"

namespace auxol {

/// Dense row-major 2D array. Coordinates are (row, col), origin top-left.
template <class T>
struct Grid {
    using value_type = T;

    int width = 0;
    int height = 0;
    std::vector<T> values;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {
        if (w < 0 || h < 0) throw InvalidArgument("grid dimensions must be non-negative");
    }
    Grid(int w, int h, std::vector<T> v) : width(w), height(h), values(std::move(v)) {
        if (values.size() != static_cast<std::size_t>(w) * h)
            throw DimensionMismatch("grid value count does not match width*height");
    }

    T& operator()(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    const T& operator()(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }

    std::size_t size() const noexcept { return values.size(); }
    bool empty() const noexcept { return values.empty(); }

    template <class U>
    bool same_shape(const Grid<U>& o) const noexcept {
        return width == o.width && height == o.height;
    }

    bool operator==(const Grid&) const = default;
};

/// Unbounded per-pixel scores (generalist or specialist output).
using LogitMap = Grid<double>;
/// Grayscale intensities in [0,1].
using Image = Grid<double>;
/// Binary foreground map, values in {0,1}.
using Mask = Grid<std::uint8_t>;

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, std::string_view what) {
    if (!a.same_shape(b))
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height));
}

inline std::size_t foreground_count(const Mask& m) {
    return static_cast<std::size_t>(std::count_if(m.values.begin(), m.values.end(), [](auto v) { return v != 0; }));
}

inline bool all_finite(const Grid<double>& g) {
    return std::all_of(g.values.begin(), g.values.end(), [](double v) { return std::isfinite(v); });
}

struct Pixel {
    int row = 0;
    int col = 0;
    auto operator<=>(const Pixel&) const = default;
};

/// Half-open on the high side: rows [row0,row1), cols [col0,col1).
struct Rect {
    int row0 = 0;
    int col0 = 0;
    int row1 = 0;
    int col1 = 0;

    int height() const noexcept { return row1 - row0; }
    int width() const noexcept { return col1 - col0; }
    bool positive_area() const noexcept { return row0 < row1 && col0 < col1; }
    bool contains(Pixel p) const noexcept { return p.row >= row0 && p.row < row1 && p.col >= col0 && p.col < col1; }
    bool inside(int w, int h) const noexcept { return row0 >= 0 && col0 >= 0 && row1 <= h && col1 <= w; }

    Rect expanded(int pad) const noexcept { return {row0 - pad, col0 - pad, row1 + pad, col1 + pad}; }
    Rect clamped(int w, int h) const noexcept {
        return {std::clamp(row0, 0, h), std::clamp(col0, 0, w), std::clamp(row1, 0, h), std::clamp(col1, 0, w)};
    }

    bool operator==(const Rect&) const = default;
};

enum class PromptKind { Box, Point };

inline std::string_view to_string(PromptKind k) { return k == PromptKind::Box ? "box" : "point"; }

inline PromptKind prompt_kind_from_string(std::string_view s) {
    if (s == "box") return PromptKind::Box;
    if (s == "point") return PromptKind::Point;
    throw InvalidArgument("unknown prompt kind: " + std::string(s));
}

/// A per-object hint: either a bounding box or a single pixel.
class Prompt {
public:
    static Prompt box(Rect r) { return Prompt(r); }
    static Prompt point(Pixel p) { return Prompt(p); }

    PromptKind kind() const noexcept { return std::holds_alternative<Rect>(where_) ? PromptKind::Box : PromptKind::Point; }
    const Rect& rect() const { return std::get<Rect>(where_); }
    const Pixel& pixel() const { return std::get<Pixel>(where_); }

    bool valid_for(int w, int h) const noexcept {
        if (kind() == PromptKind::Box) {
            const auto& r = rect();
            return r.positive_area() && r.inside(w, h);
        }
        const auto& p = pixel();
        return p.row >= 0 && p.row < h && p.col >= 0 && p.col < w;
    }

    bool operator==(const Prompt&) const = default;

private:
    explicit Prompt(Rect r) : where_(r) {}
    explicit Prompt(Pixel p) : where_(p) {}
    std::variant<Rect, Pixel> where_;
};

} // namespace auxol
