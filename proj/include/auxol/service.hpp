#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "auxol/http.hpp"
#include <nlohmann/json.hpp>

#include "auxol/codec.hpp"
#include "auxol/engine.hpp"
#include "auxol/record.hpp"

namespace auxol {

using nlohmann::json;

inline std::string checksum_hex(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Applies the keys of a JSON object onto `cfg`; unknown keys are rejected.
inline EngineConfig engine_config_from_json(const json& j, EngineConfig cfg = {}) {
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "k") cfg.k = v.get<std::size_t>();
        else if (key == "K") cfg.K = v.get<std::size_t>();
        else if (key == "grid_points") cfg.grid_points = v.get<int>();
        else if (key == "lr") cfg.lr = v.get<double>();
        else if (key == "weight_decay") cfg.weight_decay = v.get<double>();
        else if (key == "steps_per_update") cfg.steps_per_update = v.get<int>();
        else if (key == "update_mode") cfg.update_mode = update_mode_from_string(v.get<std::string>());
        else if (key == "fusion_mode") {
            const auto m = v.get<std::string>();
            if (m != "adaptive" && m != "fixed") throw InvalidArgument("fusion_mode must be adaptive or fixed");
            cfg.adaptive_fusion = m == "adaptive";
        } else if (key == "fixed_alpha") cfg.fixed_alpha = v.get<double>();
        else if (key == "refine_input") cfg.refine_input = v.get<bool>();
        else if (key == "per_prompt_tracker") cfg.per_prompt_tracker = v.get<bool>();
        else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
        else if (key == "patch_size") cfg.patch_size = v.get<int>();
        else throw InvalidArgument("unknown config key: " + key);
    }
    return cfg;
}

inline DataSource data_source_from_json(const json& j) {
    DataSource src;
    if (j.contains("prompt")) src.prompts = prompt_mode_from_string(j.at("prompt").get<std::string>());
    if (j.contains("folder")) src.folder = j.at("folder").get<std::string>();
    if (j.contains("synthetic")) {
        SyntheticConfig sc;
        for (const auto& [key, v] : j.at("synthetic").items()) {
            if (key == "seed") sc.seed = v.get<std::uint64_t>();
            else if (key == "count") sc.count = v.get<int>();
            else if (key == "image_size") sc.image_size = v.get<int>();
            else if (key == "contrast") sc.contrast = v.get<double>();
            else if (key == "texture_noise") sc.texture_noise = v.get<double>();
            else if (key == "distractors") sc.distractors = v.get<int>();
            else throw InvalidArgument("unknown synthetic key: " + key);
        }
        src.synthetic = sc;
    }
    if (src.synthetic.has_value() == src.folder.has_value())
        throw InvalidArgument("data must name exactly one of synthetic or folder");
    return src;
}

/// One interactive stream: strictly next -> (rectify | skip) -> next.
class Session {
public:
    Session(std::string id, EngineConfig cfg, std::shared_ptr<Generalist> g, std::vector<Sample> samples)
        : id_(std::move(id)), engine_(std::move(cfg), std::move(g)), samples_(std::move(samples)) {}

    struct Reply {
        int status = 200;
        json body;
    };

    Reply next() {
        std::lock_guard lock(mu_);
        if (pending_) return error(409, "a step is already pending");
        while (sample_ < samples_.size() && prompt_ >= samples_[sample_].prompts.size()) {
            ++sample_;
            prompt_ = 0;
        }
        if (sample_ >= samples_.size()) return {204, nullptr};

        const auto& s = samples_[sample_];
        const auto& prompt = s.prompts[prompt_++];
        pending_ = engine_.infer(s.image, prompt, s.sample_id, &s.gt_mask);
        const auto& p = *pending_;
        return {200,
                {{"step", p.step},
                 {"sample_id", p.sample_id},
                 {"prompt", prompt_to_json(p.prompt)},
                 {"width", s.image.width},
                 {"height", s.image.height},
                 {"image_b64", image_to_png_b64(s.image)},
                 {"fused_mask_b64", mask_to_png_b64(p.fused.mask)},
                 {"generalist_mask_b64", mask_to_png_b64(binarize(p.generalist))},
                 {"aux_mask_b64", mask_to_png_b64(binarize(p.aux))},
                 {"alpha_used", p.alpha_used},
                 {"dsc_available", false}}};
    }

    Reply rectify(const std::string& mask_b64) {
        std::lock_guard lock(mu_);
        if (!pending_) return error(409, "no pending step");
        Mask m;
        try {
            m = mask_from_png_b64(mask_b64);
        } catch (const Error& e) {
            return error(400, std::string("bad mask: ") + e.what());
        }
        if (!m.same_shape(pending_->generalist)) return error(400, "mask dimensions do not match the pending image");
        return finish(&m);
    }

    Reply skip() {
        std::lock_guard lock(mu_);
        if (!pending_) return error(409, "no pending step");
        return finish(nullptr);
    }

    json state(std::size_t tail = 10) const {
        std::lock_guard lock(mu_);
        json recs = json::array();
        for (std::size_t i = records_.size() > tail ? records_.size() - tail : 0; i < records_.size(); ++i)
            recs.push_back(to_json(records_[i]));
        return {{"session_id", id_},
                {"step_count", engine_.step_count()},
                {"batch_len", engine_.batch().size()},
                {"alpha_current", engine_.current_alpha()},
                {"param_checksum", checksum_hex(engine_.param_checksum())},
                {"pending", pending_.has_value()},
                {"records_tail", recs}};
    }

    std::string report() const {
        std::lock_guard lock(mu_);
        return report_csv(records_);
    }

    std::vector<StepRecord> records() const {
        std::lock_guard lock(mu_);
        return records_;
    }

private:
    static Reply error(int status, std::string msg) { return {status, {{"error", std::move(msg)}}}; }

    Reply finish(const Mask* y) {
        auto out = engine_.complete(std::move(*pending_), y);
        pending_.reset();
        records_.push_back(out.record);
        return {200, {{"record", to_json(out.record)}}};
    }

    mutable std::mutex mu_;
    std::string id_;
    Engine engine_;
    std::vector<Sample> samples_;
    std::size_t sample_ = 0;
    std::size_t prompt_ = 0;
    std::optional<PendingStep> pending_;
    std::vector<StepRecord> records_;
};

struct ServiceOptions {
    std::string generalist = "mock";
    MockGeneralistConfig mock;
    std::string static_dir;  // served at / when non-empty
};

/// HTTP front end over a set of independent sessions.
class SessionService {
public:
    explicit SessionService(ServiceOptions opts = {}) : opts_(std::move(opts)) { register_routes(); }

    httplib::Server& server() { return server_; }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() { server_.wait_until_ready(); }

    std::shared_ptr<Session> find(const std::string& id) const {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    /// Creates a session from a POST /session body; returns the new id.
    std::string create(const json& body) {
        auto cfg = engine_config_from_json(body.value("config", json::object()));
        cfg.expert_policy = ExpertPolicy::interactive();
        cfg.validate();
        auto src = data_source_from_json(body.at("data"));
        auto mock = opts_.mock;
        if (body.contains("mock")) {
            const auto& m = body.at("mock");
            mock.seed = m.value("seed", mock.seed);
            mock.box_corruption = m.value("box_corruption", mock.box_corruption);
            mock.point_corruption = m.value("point_corruption", mock.point_corruption);
            mock.logit_magnitude = m.value("logit_magnitude", mock.logit_magnitude);
        } else {
            mock.seed = src.synthetic ? src.synthetic->seed : mock.seed;
        }
        auto generalist = make_generalist(body.value("generalist", opts_.generalist), mock);
        auto samples = src.load();

        std::lock_guard lock(mu_);
        auto id = "s" + std::to_string(++next_id_);
        sessions_.emplace(id, std::make_shared<Session>(id, cfg, std::move(generalist), std::move(samples)));
        return id;
    }

private:
    static void send(httplib::Response& res, int status, const json& body) {
        res.status = status;
        if (status != 204) res.set_content(body.dump(), "application/json");
    }

    template <class F>
    void with_session(const httplib::Request& req, httplib::Response& res, F&& f) {
        auto s = find(req.matches[1]);
        if (!s) return send(res, 404, {{"error", "unknown session"}});
        try {
            f(*s);
        } catch (const std::exception& e) {
            send(res, 500, {{"error", e.what()}});
        }
    }

    void register_routes() {
        server_.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const auto body = json::parse(req.body);
                send(res, 201, {{"session_id", create(body)}});
            } catch (const json::exception& e) {
                send(res, 400, {{"error", std::string("invalid request: ") + e.what()}});
            } catch (const Error& e) {
                send(res, 400, {{"error", e.what()}});
            }
        });
        server_.Get(R"(/session/([A-Za-z0-9_-]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](Session& s) {
                auto r = s.next();
                send(res, r.status, r.body);
            });
        });
        server_.Post(R"(/session/([A-Za-z0-9_-]+)/rectify)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](Session& s) {
                std::string mask;
                try {
                    mask = json::parse(req.body).at("mask_b64").get<std::string>();
                } catch (const json::exception& e) {
                    return send(res, 400, {{"error", std::string("body must carry mask_b64: ") + e.what()}});
                }
                auto r = s.rectify(mask);
                send(res, r.status, r.body);
            });
        });
        server_.Post(R"(/session/([A-Za-z0-9_-]+)/skip)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](Session& s) {
                auto r = s.skip();
                send(res, r.status, r.body);
            });
        });
        server_.Get(R"(/session/([A-Za-z0-9_-]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](Session& s) { send(res, 200, s.state()); });
        });
        server_.Get(R"(/session/([A-Za-z0-9_-]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
            with_session(req, res, [&](Session& s) { res.set_content(s.report(), "text/csv"); });
        });
        if (!opts_.static_dir.empty()) server_.set_mount_point("/", opts_.static_dir);
    }

    ServiceOptions opts_;
    httplib::Server server_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 0;
};

} // namespace auxol
