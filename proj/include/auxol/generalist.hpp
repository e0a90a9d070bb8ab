#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "auxol/http.hpp"
#include <nlohmann/json.hpp>

#include "auxol/codec.hpp"
#include "auxol/geometry.hpp"
#include "auxol/grid.hpp"
#include "auxol/rng.hpp"

namespace auxol {

struct GeneralistRequest {
    const Image& image;
    Prompt prompt;
    std::int64_t sample_id = 0;
    // Simulation only: the mock corrupts this mask. Never sent over the wire.
    const Mask* oracle_mask = nullptr;
};

/// The frozen promptable segmenter.
class Generalist {
public:
    virtual ~Generalist() = default;
    /// Full-resolution logits for the prompted object.
    virtual LogitMap predict(const GeneralistRequest& req) = 0;
};

struct MockGeneralistConfig {
    std::uint64_t seed = 0;
    double box_corruption = 0.9;
    double point_corruption = 1.3;
    double logit_magnitude = 6.0;

    void validate() const {
        if (!(box_corruption >= 0.0) || !(point_corruption >= 0.0))
            throw InvalidArgument("MockGeneralistConfig: corruption must be >= 0");
        if (!(logit_magnitude > 0.0)) throw InvalidArgument("MockGeneralistConfig: logit_magnitude must be > 0");
    }
};

namespace detail {

inline Mask morph_disc(const Mask& m, int radius, bool dilate) {
    if (radius <= 0) return m;
    std::vector<Pixel> disc;
    for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc)
            if (dr * dr + dc * dc <= radius * radius) disc.push_back({dr, dc});
    Mask out(m.width, m.height);
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            // dilate: any fg in the disc; erode: all of the disc fg (outside counts as bg)
            bool v = !dilate;
            for (const auto& d : disc) {
                const int rr = r + d.row, cc = c + d.col;
                const bool fg = rr >= 0 && cc >= 0 && rr < m.height && cc < m.width && m(rr, cc);
                if (dilate && fg) {
                    v = true;
                    break;
                }
                if (!dilate && !fg) {
                    v = false;
                    break;
                }
            }
            out(r, c) = v ? 1 : 0;
        }
    }
    return out;
}

inline Mask translate(const Mask& m, int dr, int dc) {
    Mask out(m.width, m.height);
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            const int sr = r - dr, sc = c - dc;
            if (sr >= 0 && sc >= 0 && sr < m.height && sc < m.width) out(r, c) = m(sr, sc);
        }
    return out;
}

inline void paint_ellipse(Mask& m, double cr, double cc, double ar, double ac, std::uint8_t value) {
    const int r0 = std::max(0, static_cast<int>(std::floor(cr - ar))), r1 = std::min(m.height - 1, static_cast<int>(std::ceil(cr + ar)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cc - ac))), c1 = std::min(m.width - 1, static_cast<int>(std::ceil(cc + ac)));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const double y = (r - cr) / ar, x = (c - cc) / ac;
            if (x * x + y * y <= 1.0) m(r, c) = value;
        }
}

} // namespace detail

/// Deterministic corruption of the ground-truth mask standing in for a real
/// promptable segmenter: disc dilation/erosion, translation jitter, elliptical
/// blob additions/removals near the object, then per-pixel logit noise.
inline LogitMap mock_predict(const MockGeneralistConfig& cfg, const Mask& gt, const GeneralistRequest& req) {
    cfg.validate();
    require_same_shape(gt, req.image, "mock_predict");
    const auto kind = req.prompt.kind();
    const double strength = kind == PromptKind::Box ? cfg.box_corruption : cfg.point_corruption;
    Rng rng(hash_seed({cfg.seed, static_cast<std::uint64_t>(req.sample_id), static_cast<std::uint64_t>(kind)}));

    Mask m = gt;
    if (strength > 0.0 && foreground_count(gt) > 0) {
        const int radius = static_cast<int>(std::lround(strength * 5.0 * rng.uniform(0.3, 1.0)));
        const bool dilate = rng.bernoulli(0.5);
        Mask morphed = detail::morph_disc(m, radius, dilate);
        if (foreground_count(morphed) > 0) m = std::move(morphed);

        const double jitter = strength * 3.0;
        m = detail::translate(m, static_cast<int>(std::lround(rng.normal(0.0, jitter))),
                              static_cast<int>(std::lround(rng.normal(0.0, jitter))));

        const Rect box = bounding_rect(convex_hull(gt));
        const int blobs = static_cast<int>(std::floor(strength * 3.0 + rng.uniform()));
        for (int i = 0; i < blobs; ++i) {
            const double cr = rng.uniform(box.row0 - 4.0, box.row1 + 4.0);
            const double cc = rng.uniform(box.col0 - 4.0, box.col1 + 4.0);
            const double ar = rng.uniform(2.0, 2.0 + 8.0 * strength);
            const double ac = rng.uniform(2.0, 2.0 + 8.0 * strength);
            detail::paint_ellipse(m, cr, cc, ar, ac, rng.bernoulli(0.5) ? 1 : 0);
        }
    }

    LogitMap out(gt.width, gt.height);
    const double noise = strength * cfg.logit_magnitude / 4.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double base = m.values[i] ? cfg.logit_magnitude : -cfg.logit_magnitude;
        out.values[i] = noise > 0.0 ? base + rng.normal(0.0, noise) : base;
    }
    return out;
}

class MockGeneralist final : public Generalist {
public:
    explicit MockGeneralist(MockGeneralistConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    LogitMap predict(const GeneralistRequest& req) override {
        if (req.oracle_mask == nullptr) throw MissingGroundTruth("mock generalist needs the ground-truth mask to corrupt");
        if (!req.prompt.valid_for(req.image.width, req.image.height)) throw InvalidArgument("mock generalist: prompt out of bounds");
        return mock_predict(cfg_, *req.oracle_mask, req);
    }

    const MockGeneralistConfig& config() const noexcept { return cfg_; }

private:
    MockGeneralistConfig cfg_;
};

inline nlohmann::json prompt_to_json(const Prompt& p) {
    nlohmann::json j;
    j["kind"] = std::string(to_string(p.kind()));
    if (p.kind() == PromptKind::Box) {
        const auto& r = p.rect();
        j["box"] = {r.row0, r.col0, r.row1, r.col1};
        j["point"] = nullptr;
    } else {
        j["box"] = nullptr;
        j["point"] = {p.pixel().row, p.pixel().col};
    }
    return j;
}

inline Prompt prompt_from_json(const nlohmann::json& j) {
    const auto kind = prompt_kind_from_string(j.at("kind").get<std::string>());
    if (kind == PromptKind::Box) {
        const auto& b = j.at("box");
        if (!b.is_array() || b.size() != 4) throw InvalidArgument("prompt.box must be [row0,col0,row1,col1]");
        return Prompt::box({b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()});
    }
    const auto& p = j.at("point");
    if (!p.is_array() || p.size() != 2) throw InvalidArgument("prompt.point must be [row,col]");
    return Prompt::point({p[0].get<int>(), p[1].get<int>()});
}

/// JSON body of POST /predict.
inline nlohmann::json predict_request_json(const GeneralistRequest& req) {
    return {{"sample_id", req.sample_id},
            {"width", req.image.width},
            {"height", req.image.height},
            {"image_b64", image_to_png_b64(req.image)},
            {"prompt", prompt_to_json(req.prompt)}};
}

/// Validates and parses a /predict response against the expected dimensions.
inline LogitMap parse_predict_response(std::string_view body, int width, int height) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("predict response is not JSON: ") + e.what());
    }
    try {
        const int w = j.at("width").get<int>(), h = j.at("height").get<int>();
        if (w != width || h != height)
            throw MalformedResponse("predict response dimensions " + std::to_string(w) + "x" + std::to_string(h) +
                                    " do not match request " + std::to_string(width) + "x" + std::to_string(height));
        const auto& arr = j.at("logits");
        if (!arr.is_array() || arr.size() != static_cast<std::size_t>(w) * h)
            throw MalformedResponse("predict response logits must hold width*height values");
        LogitMap out(w, h);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number()) throw MalformedResponse("predict response logits must be numbers");
            out.values[i] = arr[i].get<double>();
            if (!std::isfinite(out.values[i])) throw MalformedResponse("predict response contains non-finite logits");
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("predict response missing fields: ") + e.what());
    }
}

/// Client for an external segmenter speaking the /predict protocol.
class RemoteGeneralist final : public Generalist {
public:
    /// `endpoint` is scheme://host:port with an optional path prefix; requests go to <prefix>/predict.
    explicit RemoteGeneralist(const std::string& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30))
        : timeout_(timeout) {
        const auto scheme_end = endpoint.find("://");
        const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        const auto path_start = endpoint.find('/', host_start);
        base_ = endpoint.substr(0, path_start);
        if (path_start != std::string::npos) prefix_ = endpoint.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        if (base_.empty() || host_start == base_.size()) throw InvalidArgument("remote generalist: bad endpoint " + endpoint);
    }

    LogitMap predict(const GeneralistRequest& req) override {
        httplib::Client cli(base_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());

        const auto body = predict_request_json(req).dump();
        auto res = cli.Post(prefix_ + "/predict", body, "application/json");
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::Write)
                throw Timeout("remote generalist: " + httplib::to_string(err));
            throw BackendUnavailable("remote generalist unreachable at " + base_ + ": " + httplib::to_string(err));
        }
        if (res->status < 200 || res->status >= 300)
            throw HttpError("remote generalist returned HTTP " + std::to_string(res->status));
        return parse_predict_response(res->body, req.image.width, req.image.height);
    }

private:
    std::string base_;
    std::string prefix_;
    std::chrono::milliseconds timeout_;
};

/// "mock" or "remote=URL".
inline std::shared_ptr<Generalist> make_generalist(std::string_view spec, const MockGeneralistConfig& mock = {},
                                                   std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    if (spec == "mock") return std::make_shared<MockGeneralist>(mock);
    if (spec.starts_with("remote=")) return std::make_shared<RemoteGeneralist>(std::string(spec.substr(7)), timeout);
    throw InvalidArgument("unknown generalist: " + std::string(spec));
}

} // namespace auxol
