#pragma once

#include <string>
#include <vector>

#include "auxol/grid.hpp"
#include "auxol/rng.hpp"

namespace auxol::test {

// Rows of '#' (foreground) and '.' (background).
inline Mask mask_from_rows(const std::vector<std::string>& rows) {
    Mask m(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()));
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) m(r, c) = rows[r][c] == '#';
    return m;
}

inline Mask filled_rect(int w, int h, Rect r) {
    Mask m(w, h);
    for (int i = r.row0; i < r.row1; ++i)
        for (int j = r.col0; j < r.col1; ++j) m(i, j) = 1;
    return m;
}

inline Mask random_mask(Rng& rng, int w, int h, double p) {
    Mask m(w, h);
    for (auto& v : m.values) v = rng.bernoulli(p);
    return m;
}

inline LogitMap random_logits(Rng& rng, int w, int h, double scale) {
    LogitMap m(w, h);
    for (auto& v : m.values) v = rng.normal(0.0, scale);
    return m;
}

inline LogitMap constant_map(int w, int h, double v) { return LogitMap(w, h, v); }

} // namespace auxol::test
