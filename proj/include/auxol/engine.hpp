#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auxol/adamw.hpp"
#include "auxol/aux_model.hpp"
#include "auxol/data.hpp"
#include "auxol/fusion.hpp"
#include "auxol/generalist.hpp"
#include "auxol/geometry.hpp"
#include "auxol/metrics.hpp"
#include "auxol/online_batch.hpp"
#include "auxol/record.hpp"

namespace auxol {

struct ExpertPolicy {
    enum class Kind { Full, Fraction, Threshold, Interactive, None };

    Kind kind = Kind::Full;
    double value = 0.0;  // p for Fraction, T for Threshold

    static ExpertPolicy full() { return {Kind::Full, 0.0}; }
    static ExpertPolicy none() { return {Kind::None, 0.0}; }
    static ExpertPolicy interactive() { return {Kind::Interactive, 0.0}; }
    static ExpertPolicy fraction(double p) {
        if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("fraction policy needs 0 < p < 1");
        return {Kind::Fraction, p};
    }
    static ExpertPolicy threshold(double t) {
        if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("threshold policy needs 0 < T < 1");
        return {Kind::Threshold, t};
    }

    /// full | none | interactive | fraction=P | threshold=T
    static ExpertPolicy parse(std::string_view s) {
        if (s == "full") return full();
        if (s == "none") return none();
        if (s == "interactive") return interactive();
        auto number = [&](std::string_view prefix) {
            const std::string rest(s.substr(prefix.size()));
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(rest, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != rest.size()) throw InvalidArgument("bad policy value: " + std::string(s));
            return v;
        };
        if (s.starts_with("fraction=")) return fraction(number("fraction="));
        if (s.starts_with("threshold=")) return threshold(number("threshold="));
        throw InvalidArgument("unknown policy: " + std::string(s));
    }

    bool needs_ground_truth() const { return kind == Kind::Full || kind == Kind::Fraction || kind == Kind::Threshold; }
    bool operator==(const ExpertPolicy&) const = default;
};

/// Whether the simulated expert rectifies step `step_index` (0-based).
/// Fraction(p) fires when floor((i+1)p) increments, which gives exactly one
/// rectification every 1/p steps, the first at step ceil(1/p)-1.
inline bool decide_rectify(const ExpertPolicy& policy, std::uint64_t step_index, std::optional<double> dsc_fused = {}) {
    switch (policy.kind) {
    case ExpertPolicy::Kind::Full: return true;
    case ExpertPolicy::Kind::None:
    case ExpertPolicy::Kind::Interactive: return false;
    case ExpertPolicy::Kind::Fraction: {
        const double n = static_cast<double>(step_index);
        return std::floor((n + 1.0) * policy.value) > std::floor(n * policy.value);
    }
    case ExpertPolicy::Kind::Threshold:
        if (!dsc_fused) throw MissingGroundTruth("threshold policy needs the fused Dice score");
        return *dsc_fused < policy.value;
    }
    return false;
}

enum class UpdateMode { OnlineBatch, SingleSample };

inline std::string_view to_string(UpdateMode m) { return m == UpdateMode::OnlineBatch ? "online-batch" : "single-sample"; }

inline UpdateMode update_mode_from_string(std::string_view s) {
    if (s == "online-batch" || s == "batch") return UpdateMode::OnlineBatch;
    if (s == "single-sample" || s == "single") return UpdateMode::SingleSample;
    throw InvalidArgument("unknown update mode: " + std::string(s));
}

struct EngineConfig {
    std::size_t k = kDefaultBatchCapacity;
    std::size_t K = kDefaultTrackerWindow;
    int grid_points = kDefaultGridPoints;
    double lr = 0.0005;
    double weight_decay = 0.01;
    int steps_per_update = 1;
    UpdateMode update_mode = UpdateMode::OnlineBatch;
    bool adaptive_fusion = true;
    double fixed_alpha = kDefaultAlpha;
    bool per_prompt_tracker = false;
    bool refine_input = false;
    ExpertPolicy expert_policy = ExpertPolicy::full();
    std::uint64_t seed = 0;

    int patch_size = 64;
    std::array<int, 2> widths{16, 32};
    int crop_pad = kDefaultCropPad;
    int fallback_size = kDefaultFallbackSize;
    double paste_fill = kDefaultPasteFill;
    // Scale applied to generalist logits fed as the refinement channel (1 / logit magnitude).
    double refine_scale = 1.0 / 6.0;
    HausdorffVariant hd_variant = HausdorffVariant::Exact;

    void validate() const {
        if (k < 1) throw InvalidArgument("k must be >= 1");
        if (K < 1) throw InvalidArgument("K must be >= 1");
        if (grid_points < 2) throw InvalidArgument("grid_points must be >= 2");
        if (!(lr >= 0.0)) throw InvalidArgument("lr must be >= 0");
        if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
        if (steps_per_update < 1) throw InvalidArgument("steps_per_update must be >= 1");
        if (!(fixed_alpha >= 0.0 && fixed_alpha <= 1.0)) throw AlphaOutOfRange("fixed_alpha must lie in [0,1]");
        if (crop_pad < 0 || fallback_size < 1) throw InvalidArgument("bad crop geometry");
        aux_config().validate();
    }

    AuxConfig aux_config() const { return {patch_size, refine_input ? 2 : 1, widths, seed}; }
    AdamWHyper adamw() const { return {lr, 0.9, 0.999, 1e-8, weight_decay}; }
};

/// Specialist training pair stored in the online batch.
struct PatchSample {
    std::vector<float> patch;           // C x P x P
    std::vector<std::uint8_t> target;   // P x P
    bool operator==(const PatchSample&) const = default;
};

/// Everything produced by the inference half of a step, before any learning.
struct PendingStep {
    std::uint64_t step = 0;
    std::int64_t sample_id = 0;
    Prompt prompt = Prompt::point({0, 0});
    std::optional<Mask> gt;
    LogitMap generalist;     // s, full resolution
    Rect crop_rect;
    std::vector<float> patch;
    AlignedVector<float> aux_local;  // specialist logits at patch resolution
    LogitMap aux;                  // u, pasted back to full resolution
    double alpha_used = kDefaultAlpha;
    FusionResult fused;
};

struct StepOutput {
    FusionResult fused;
    StepRecord record;
};

/// Sequential online learner: generalist inference, specialist inference on the
/// prompt crop, scalar logit fusion, then (when rectified) online-batch training
/// and optimal-alpha bookkeeping.
class Engine {
public:
    Engine(EngineConfig cfg, std::shared_ptr<Generalist> generalist)
        : cfg_((cfg.validate(), cfg)),
          generalist_(std::move(generalist)),
          params_(init_aux<float>(cfg_.aux_config())),
          opt_(params_.values.size(), cfg_.adamw()),
          batch_(cfg_.k),
          trackers_{AlphaTracker(cfg_.K), AlphaTracker(cfg_.K)} {
        if (!generalist_) throw InvalidArgument("engine needs a generalist");
    }

    /// Stages 1-4: predict, crop, specialist forward, paste back, fuse.
    PendingStep infer(const Image& image, const Prompt& prompt, std::int64_t sample_id, const Mask* gt = nullptr) {
        if (!prompt.valid_for(image.width, image.height)) throw InvalidArgument("prompt outside image bounds");
        if (gt) require_same_shape(image, *gt, "engine: image vs ground truth");

        PendingStep p;
        p.step = step_count_;
        p.sample_id = sample_id;
        p.prompt = prompt;
        if (gt) p.gt = *gt;
        p.generalist = generalist_->predict(GeneralistRequest{image, prompt, sample_id, gt});
        require_same_shape(image, p.generalist, "generalist output");
        if (!all_finite(p.generalist)) throw MalformedResponse("generalist produced non-finite logits");

        p.crop_rect = prompt_to_crop_rect(prompt, p.generalist, cfg_.crop_pad, cfg_.fallback_size);
        p.patch = make_patch(image, p.generalist, prompt.kind(), p.crop_rect);
        auto fwd = aux_forward<float>(params_, p.patch);
        p.aux_local = std::move(fwd.logits);

        const int ps = cfg_.patch_size;
        LogitMap local(ps, ps);
        for (std::size_t i = 0; i < local.size(); ++i) local.values[i] = p.aux_local[i];
        p.aux = paste_back(local, p.crop_rect, image.width, image.height, cfg_.paste_fill);

        p.alpha_used = cfg_.adaptive_fusion ? mutable_tracker(prompt.kind()).alpha() : cfg_.fixed_alpha;
        p.fused = fuse(p.generalist, p.aux, p.alpha_used);
        return p;
    }

    /// Stages 5-6: optional learning from `rectification`, then the log row.
    StepOutput complete(PendingStep p, const Mask* rectification) {
        if (p.step != step_count_) throw InvalidArgument("pending step is out of sequence");
        StepRecord rec;
        rec.step = p.step;
        rec.sample_id = p.sample_id;
        rec.prompt_kind = p.prompt.kind();
        rec.alpha_used = p.alpha_used;

        if (rectification) {
            require_same_shape(*rectification, p.generalist, "rectification");
            rec.rectified = true;
            rec.batch_loss = learn(p, *rectification);
            if (cfg_.adaptive_fusion) {
                const auto best = optimal_alpha(p.generalist, p.aux, *rectification, cfg_.grid_points);
                rec.alpha_star = best.alpha_star;
                mutable_tracker(p.prompt.kind()).push(best.alpha_star);
            }
        }
        rec.batch_len = batch_.size();

        const Mask* ref = p.gt ? &*p.gt : rectification;
        if (ref) {
            rec.dsc_generalist = dice_coefficient(binarize(p.generalist), *ref);
            rec.dsc_aux = dice_coefficient(binarize(p.aux), *ref);
            rec.dsc_fused = dice_coefficient(p.fused.mask, *ref);
            rec.hd_fused = hausdorff_distance(p.fused.mask, *ref, cfg_.hd_variant);
        }
        ++step_count_;
        return {std::move(p.fused), rec};
    }

    /// One full step with the configured simulated expert.
    StepOutput step(const Image& image, const Mask* gt, const Prompt& prompt, std::int64_t sample_id) {
        const auto& policy = cfg_.expert_policy;
        if (policy.kind == ExpertPolicy::Kind::Interactive)
            throw InvalidArgument("interactive policy steps are driven by infer/complete");
        if (policy.needs_ground_truth() && gt == nullptr) throw MissingGroundTruth("simulated expert needs ground truth");

        auto pending = infer(image, prompt, sample_id, gt);
        std::optional<double> dsc;
        if (policy.kind == ExpertPolicy::Kind::Threshold) dsc = dice_coefficient(pending.fused.mask, *gt);
        const bool rectify = decide_rectify(policy, pending.step, dsc);
        return complete(std::move(pending), rectify ? gt : nullptr);
    }

    double current_alpha(PromptKind kind = PromptKind::Box) const {
        return cfg_.adaptive_fusion ? tracker(kind).alpha() : cfg_.fixed_alpha;
    }
    std::uint64_t step_count() const noexcept { return step_count_; }
    std::uint64_t param_checksum() const noexcept { return params_.fingerprint(); }
    const EngineConfig& config() const noexcept { return cfg_; }
    const AuxParams<float>& params() const noexcept { return params_; }
    const OptimizerState<float>& optimizer() const noexcept { return opt_; }
    const OnlineBatch<PatchSample>& batch() const noexcept { return batch_; }
    const AlphaTracker& tracker(PromptKind kind) const { return trackers_[tracker_slot(kind)]; }

    void restore(AuxParams<float> params, OptimizerState<float> opt) {
        if (params.config != params_.config) throw CheckpointError("checkpoint architecture does not match engine config");
        params_ = std::move(params);
        opt_ = std::move(opt);
    }

    /// Specialist input for a crop: standardized intensities, plus the scaled
    /// generalist logits as a second channel in refinement mode (zeros for point prompts).
    std::vector<float> make_patch(const Image& image, const LogitMap& generalist, PromptKind kind, const Rect& r) const {
        const int ps = cfg_.patch_size;
        const auto img = resize_bilinear(crop(image, r), ps, ps);
        double mean = 0.0, sq = 0.0;
        for (double v : img.values) mean += v;
        mean /= static_cast<double>(img.size());
        for (double v : img.values) sq += (v - mean) * (v - mean);
        const double sd = std::sqrt(sq / static_cast<double>(img.size()));
        const double inv = sd > 1e-6 ? 1.0 / sd : 1.0;

        std::vector<float> patch(cfg_.aux_config().patch_values(), 0.0f);
        for (std::size_t i = 0; i < img.size(); ++i) patch[i] = static_cast<float>((img.values[i] - mean) * inv);
        if (cfg_.refine_input && kind == PromptKind::Box) {
            const auto s = resize_bilinear(crop(generalist, r), ps, ps);
            for (std::size_t i = 0; i < s.size(); ++i) patch[img.size() + i] = static_cast<float>(s.values[i] * cfg_.refine_scale);
        }
        return patch;
    }

private:
    std::size_t tracker_slot(PromptKind kind) const {
        return cfg_.per_prompt_tracker && kind == PromptKind::Point ? 1 : 0;
    }
    AlphaTracker& mutable_tracker(PromptKind kind) { return trackers_[tracker_slot(kind)]; }

    // Returns the mean batch loss of the (first) training pass.
    double learn(const PendingStep& p, const Mask& rectification) {
        const int ps = cfg_.patch_size;
        const Mask target = resize_mask(crop(rectification, p.crop_rect), ps, ps);

        std::vector<float> dl(p.aux_local.size());
        const double loss = dice_loss<float>(p.aux_local, target.values, dl);
        PatchSample sample{p.patch, target.values};

        std::optional<double> first_loss;
        if (cfg_.update_mode == UpdateMode::OnlineBatch) {
            batch_.admit({std::move(sample), loss, p.step});
            for (int it = 0; it < cfg_.steps_per_update; ++it) {
                std::vector<TrainingPair<float>> pairs;
                for (const auto& e : batch_.snapshot()) pairs.push_back({e.payload.patch, e.payload.target});
                auto g = batch_gradient<float>(params_, pairs);
                batch_.refresh_losses(g.losses);
                adamw_step<float>(params_.values, g.grad, opt_);
                if (!first_loss) first_loss = g.mean_loss;
            }
        } else {
            const std::array<TrainingPair<float>, 1> pairs{TrainingPair<float>{sample.patch, sample.target}};
            for (int it = 0; it < cfg_.steps_per_update; ++it) {
                auto g = batch_gradient<float>(params_, pairs);
                adamw_step<float>(params_.values, g.grad, opt_);
                if (!first_loss) first_loss = g.mean_loss;
            }
        }
        return *first_loss;
    }

    EngineConfig cfg_;
    std::shared_ptr<Generalist> generalist_;
    AuxParams<float> params_;
    OptimizerState<float> opt_;
    OnlineBatch<PatchSample> batch_;
    std::array<AlphaTracker, 2> trackers_;
    std::uint64_t step_count_ = 0;
};

/// Runs every (sample, prompt) pair in order with the configured simulated expert.
inline std::vector<StepRecord> run_stream(Engine& engine, std::span<const Sample> samples) {
    if (samples.empty()) throw InvalidArgument("run_stream: empty sample sequence");
    std::vector<StepRecord> records;
    for (const auto& s : samples) {
        if (s.prompts.empty()) throw InvalidArgument("run_stream: sample " + std::to_string(s.sample_id) + " has no prompt");
        for (const auto& prompt : s.prompts) records.push_back(engine.step(s.image, &s.gt_mask, prompt, s.sample_id).record);
    }
    return records;
}

inline std::vector<StepRecord> run_stream(const EngineConfig& cfg, std::span<const Sample> samples,
                                          std::shared_ptr<Generalist> generalist) {
    Engine engine(cfg, std::move(generalist));
    return run_stream(engine, samples);
}

} // namespace auxol
