#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "auxol/codec.hpp"
#include "auxol/geometry.hpp"
#include "auxol/grid.hpp"
#include "auxol/rng.hpp"

namespace auxol {

struct Sample {
    std::int64_t sample_id = 0;
    Image image;
    Mask gt_mask;
    std::vector<Prompt> prompts;
    std::string name;  // file stem for folder datasets

    bool operator==(const Sample&) const = default;
};

enum class PromptMode { Box, Point, Both };

inline PromptMode prompt_mode_from_string(std::string_view s) {
    if (s == "box") return PromptMode::Box;
    if (s == "point") return PromptMode::Point;
    if (s == "both") return PromptMode::Both;
    throw InvalidArgument("unknown prompt mode: " + std::string(s));
}

/// Box: tight bounding box of the foreground. Point: the centroid when it is a
/// foreground pixel, else the nearest foreground pixel (ties in row-major order).
inline Prompt derive_prompt(const Mask& gt, PromptKind kind) {
    const auto count = foreground_count(gt);
    if (count == 0) throw EmptyMask("derive_prompt: ground truth has no foreground");
    if (kind == PromptKind::Box) {
        Rect r{gt.height, gt.width, 0, 0};
        for (int row = 0; row < gt.height; ++row)
            for (int col = 0; col < gt.width; ++col)
                if (gt(row, col)) {
                    r.row0 = std::min(r.row0, row);
                    r.col0 = std::min(r.col0, col);
                    r.row1 = std::max(r.row1, row + 1);
                    r.col1 = std::max(r.col1, col + 1);
                }
        return Prompt::box(r);
    }
    double sr = 0.0, sc = 0.0;
    for (int row = 0; row < gt.height; ++row)
        for (int col = 0; col < gt.width; ++col)
            if (gt(row, col)) {
                sr += row;
                sc += col;
            }
    const double cr = sr / static_cast<double>(count), cc = sc / static_cast<double>(count);
    const Pixel rounded{static_cast<int>(std::lround(cr)), static_cast<int>(std::lround(cc))};
    if (gt(rounded.row, rounded.col)) return Prompt::point(rounded);

    Pixel best{};
    double best_d = std::numeric_limits<double>::infinity();
    for (int row = 0; row < gt.height; ++row)
        for (int col = 0; col < gt.width; ++col)
            if (gt(row, col)) {
                const double d = (row - cr) * (row - cr) + (col - cc) * (col - cc);
                if (d < best_d) {
                    best_d = d;
                    best = {row, col};
                }
            }
    return Prompt::point(best);
}

inline std::vector<Prompt> derive_prompts(const Mask& gt, PromptMode mode) {
    switch (mode) {
    case PromptMode::Box: return {derive_prompt(gt, PromptKind::Box)};
    case PromptMode::Point: return {derive_prompt(gt, PromptKind::Point)};
    case PromptMode::Both: return {derive_prompt(gt, PromptKind::Box), derive_prompt(gt, PromptKind::Point)};
    }
    return {};
}

enum class ShapeFamily : int { Ellipse = 0, RoundedRect = 1, Blob = 2 };

struct SyntheticConfig {
    std::uint64_t seed = 0;
    int count = 200;
    int image_size = 128;
    std::array<double, 3> family_weights{1.0 / 3, 1.0 / 3, 1.0 / 3};
    // When set, weights move linearly from family_weights (first sample) to these (last sample).
    std::optional<std::array<double, 3>> drift_weights;
    double texture_noise = 0.12;
    double contrast = 0.12;
    // Unlabelled look-alike shapes drawn beneath the target object.
    int distractors = 3;
    PromptMode prompts = PromptMode::Box;

    void validate() const {
        if (count < 1) throw InvalidArgument("SyntheticConfig: count must be >= 1");
        if (image_size < 32) throw InvalidArgument("SyntheticConfig: image_size must be >= 32");
        auto check = [](const std::array<double, 3>& w) {
            double s = 0;
            for (double v : w) {
                if (v < 0) throw InvalidArgument("SyntheticConfig: negative shape weight");
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("SyntheticConfig: shape weights must sum to 1");
        };
        check(family_weights);
        if (drift_weights) check(*drift_weights);
    }
};

namespace detail {

inline ShapeFamily pick_family(const SyntheticConfig& cfg, int index, Rng& rng) {
    auto w = cfg.family_weights;
    if (cfg.drift_weights && cfg.count > 1) {
        const double t = static_cast<double>(index) / (cfg.count - 1);
        for (int i = 0; i < 3; ++i) w[i] = (1.0 - t) * w[i] + t * (*cfg.drift_weights)[i];
    }
    const double u = rng.uniform();
    if (u < w[0]) return ShapeFamily::Ellipse;
    if (u < w[0] + w[1]) return ShapeFamily::RoundedRect;
    return ShapeFamily::Blob;
}

// Implicit inside-test for the chosen shape in its local rotated frame.
inline Mask render_shape(ShapeFamily family, int size, Rng& rng) {
    const double cr = rng.uniform(0.35, 0.65) * size, cc = rng.uniform(0.35, 0.65) * size;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double scale = size / 128.0;

    double a = 0, b = 0, corner = 0, radius = 0;
    std::array<double, 3> amp{}, phase{};
    switch (family) {
    case ShapeFamily::Ellipse:
        a = rng.uniform(12.0, 28.0) * scale;
        b = rng.uniform(10.0, 24.0) * scale;
        break;
    case ShapeFamily::RoundedRect:
        a = rng.uniform(11.0, 24.0) * scale;
        b = rng.uniform(9.0, 20.0) * scale;
        corner = rng.uniform(2.0, std::min(a, b) * 0.6);
        break;
    case ShapeFamily::Blob:
        radius = rng.uniform(13.0, 24.0) * scale;
        for (int k = 0; k < 3; ++k) {
            amp[k] = rng.uniform(0.05, 0.22);
            phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        break;
    }

    Mask m(size, size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double dy = r - cr, dx = c - cc;
            const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
            bool inside = false;
            switch (family) {
            case ShapeFamily::Ellipse: inside = (u * u) / (a * a) + (v * v) / (b * b) <= 1.0; break;
            case ShapeFamily::RoundedRect: {
                const double qx = std::abs(u) - (a - corner), qy = std::abs(v) - (b - corner);
                const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
                inside = std::hypot(ox, oy) + std::min(std::max(qx, qy), 0.0) <= corner;
                break;
            }
            case ShapeFamily::Blob: {
                const double phi = std::atan2(v, u);
                double rr = radius;
                for (int k = 0; k < 3; ++k) rr *= 1.0 + amp[k] * std::cos((k + 2) * phi + phase[k]);
                inside = std::hypot(u, v) <= rr;
                break;
            }
            }
            m(r, c) = inside ? 1 : 0;
        }
    }
    if (foreground_count(m) == 0) m(static_cast<int>(cr), static_cast<int>(cc)) = 1;
    return m;
}

struct Wave {
    double fy, fx, phase, amp;
};

inline std::vector<Wave> texture_waves(Rng& rng, int n, double max_amp) {
    std::vector<Wave> w(n);
    for (auto& x : w)
        x = {rng.uniform(0.02, 0.25), rng.uniform(0.02, 0.25), rng.uniform(0.0, 2.0 * std::numbers::pi),
             rng.uniform(0.3, 1.0) * max_amp};
    return w;
}

inline double wave_sum(const std::vector<Wave>& waves, int r, int c) {
    double s = 0.0;
    for (const auto& w : waves) s += w.amp * std::sin(w.fy * r + w.fx * c + w.phase);
    return s;
}

} // namespace detail

inline ShapeFamily synthetic_family(const SyntheticConfig& cfg, int index) {
    Rng rng(hash_seed({cfg.seed, static_cast<std::uint64_t>(index), 0x5a3dULL}));
    return detail::pick_family(cfg, index, rng);
}

/// One textured foreground shape per image; intensities are quantized to 8 bits
/// so a stream saved to disk and reloaded is identical.
inline std::vector<Sample> generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(cfg.count));
    const int n = cfg.image_size;
    for (int i = 0; i < cfg.count; ++i) {
        Rng rng(hash_seed({cfg.seed, static_cast<std::uint64_t>(i), 0x5a3dULL}));
        const auto family = detail::pick_family(cfg, i, rng);
        Sample s;
        s.sample_id = i;
        s.gt_mask = detail::render_shape(family, n, rng);

        const double bg_level = rng.uniform(0.25, 0.4);
        const double fg_level = bg_level + cfg.contrast * rng.uniform(0.8, 1.2);
        const auto bg_waves = detail::texture_waves(rng, 3, 0.06);
        const auto fg_waves = detail::texture_waves(rng, 2, 0.04);

        Grid<double> level(n, n, bg_level);
        for (int d = 0; d < cfg.distractors; ++d) {
            const auto shape = detail::render_shape(static_cast<ShapeFamily>(rng.uniform_int(0, 2)), n, rng);
            const int dr = rng.uniform_int(-n / 3, n / 3), dc = rng.uniform_int(-n / 3, n / 3);
            const double v = bg_level + cfg.contrast * rng.uniform(0.6, 1.2);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    const int sr = r - dr, sc = c - dc;
                    if (sr >= 0 && sc >= 0 && sr < n && sc < n && shape(sr, sc)) level(r, c) = v;
                }
        }
        Image img(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const bool fg = s.gt_mask(r, c) != 0;
                double v = fg ? fg_level + detail::wave_sum(fg_waves, r, c) : level(r, c) + detail::wave_sum(bg_waves, r, c);
                v += rng.normal(0.0, cfg.texture_noise);
                img(r, c) = std::clamp(v, 0.0, 1.0);
            }
        s.image = image_from_pixels(quantize_image(img));
        s.prompts = derive_prompts(s.gt_mask, cfg.prompts);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string sample_stem(const Sample& s) {
    if (!s.name.empty()) return s.name;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(s.sample_id));
    return buf;
}

/// Writes images/NAME.png and masks/NAME.png (0/255) for every sample.
inline void save_folder(const std::vector<Sample>& samples, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    for (const auto& s : samples) {
        const auto stem = sample_stem(s);
        write_file(dir / "images" / (stem + ".png"), encode_png_gray(quantize_image(s.image)));
        Grid<std::uint8_t> px(s.gt_mask.width, s.gt_mask.height);
        for (std::size_t i = 0; i < px.size(); ++i) px.values[i] = s.gt_mask.values[i] ? 255 : 0;
        write_file(dir / "masks" / (stem + ".png"), encode_png_gray(px));
    }
}

/// Loads images/NAME.png + masks/NAME.png pairs in lexicographic stem order.
/// Masks are binarized at 128/255.
inline std::vector<Sample> load_folder(const std::filesystem::path& dir, PromptMode prompts = PromptMode::Box) {
    const auto img_dir = dir / "images", mask_dir = dir / "masks";
    if (!std::filesystem::is_directory(img_dir)) throw IOFailure("missing directory " + img_dir.string());
    std::vector<std::string> stems;
    for (const auto& e : std::filesystem::directory_iterator(img_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") stems.push_back(e.path().stem().string());
    std::sort(stems.begin(), stems.end());

    std::vector<Sample> out;
    for (std::size_t i = 0; i < stems.size(); ++i) {
        const auto& stem = stems[i];
        const auto mask_path = mask_dir / (stem + ".png");
        if (!std::filesystem::exists(mask_path)) throw MissingMask("no mask for image '" + stem + "'");
        Grid<std::uint8_t> img_px, mask_px;
        try {
            img_px = decode_png_gray(read_file(img_dir / (stem + ".png")));
            mask_px = decode_png_gray(read_file(mask_path));
        } catch (const UnreadableImage& e) {
            throw UnreadableImage("'" + stem + "': " + e.what());
        }
        if (!img_px.same_shape(mask_px)) throw SizeMismatch("image and mask sizes differ for '" + stem + "'");
        Sample s;
        s.sample_id = static_cast<std::int64_t>(i);
        s.name = stem;
        s.image = image_from_pixels(img_px);
        s.gt_mask = Mask(mask_px.width, mask_px.height);
        for (std::size_t p = 0; p < mask_px.size(); ++p) s.gt_mask.values[p] = mask_px.values[p] >= 128 ? 1 : 0;
        if (foreground_count(s.gt_mask) > 0) s.prompts = derive_prompts(s.gt_mask, prompts);
        out.push_back(std::move(s));
    }
    return out;
}

/// Either a synthetic stream or a folder dataset.
struct DataSource {
    std::optional<SyntheticConfig> synthetic;
    std::optional<std::filesystem::path> folder;
    PromptMode prompts = PromptMode::Box;

    std::vector<Sample> load() const {
        if (synthetic.has_value() == folder.has_value()) throw InvalidArgument("exactly one data source (synthetic or folder) is required");
        if (synthetic) {
            auto cfg = *synthetic;
            cfg.prompts = prompts;
            return generate_synthetic(cfg);
        }
        return load_folder(*folder, prompts);
    }
};

} // namespace auxol
