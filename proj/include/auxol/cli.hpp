#pragma once

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "auxol/checkpoint.hpp"
#include "auxol/engine.hpp"
#include "auxol/service.hpp"
#include "auxol/summary.hpp"

namespace auxol {

/// Parsed command line: subcommand, engine config, data source and outputs.
struct RunSpec {
    std::string command;
    EngineConfig engine;
    DataSource data;
    SyntheticConfig synthetic;
    bool use_synthetic = false;
    std::string data_dir;
    std::string generalist = "mock";
    MockGeneralistConfig mock;
    int timeout_ms = 30000;
    std::string out;
    std::string checkpoint_out;
    std::string checkpoint_in;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string ui_dir;
};

struct AblationRow {
    UpdateMode update_mode;
    bool adaptive;
    RunSummary summary;
};

inline std::vector<AblationRow> run_ablation(const EngineConfig& base, std::span<const Sample> samples,
                                             const std::shared_ptr<Generalist>& generalist) {
    std::vector<AblationRow> rows;
    for (auto mode : {UpdateMode::SingleSample, UpdateMode::OnlineBatch})
        for (bool adaptive : {false, true}) {
            auto cfg = base;
            cfg.update_mode = mode;
            cfg.adaptive_fusion = adaptive;
            const auto recs = run_stream(cfg, samples, generalist);
            rows.push_back({mode, adaptive, summarize(recs)});
        }
    return rows;
}

inline void print_ablation(std::span<const AblationRow> rows, std::ostream& out) {
    out << "update_mode,fusion_mode,mean_dsc_generalist,mean_dsc_fused,mean_hd_fused,mean_dsc_fused_last_quarter\n";
    for (const auto& r : rows) {
        out << to_string(r.update_mode) << ',' << (r.adaptive ? "adaptive" : "fixed") << ','
            << detail::fixed6(r.summary.mean_dsc_generalist) << ',' << detail::fixed6(r.summary.mean_dsc_fused) << ','
            << detail::fixed6(r.summary.mean_hd_fused) << ',' << detail::fixed6(r.summary.mean_dsc_fused_last_quarter)
            << '\n';
    }
}

namespace detail {

inline CLI::Validator policy_validator() {
    return CLI::Validator(
        [](std::string& s) -> std::string {
            try {
                ExpertPolicy::parse(s);
            } catch (const Error& e) {
                return e.what();
            }
            return {};
        },
        "POLICY", "policy");
}

inline CLI::Validator generalist_validator() {
    return CLI::Validator(
        [](std::string& s) -> std::string {
            if (s == "mock" || (s.starts_with("remote=") && s.size() > 7)) return {};
            return "expected mock or remote=URL, got " + s;
        },
        "mock|remote=URL", "generalist");
}

inline int execute(RunSpec& spec, std::ostream& out, std::ostream& err) {
    auto& cfg = spec.engine;
    const auto policy = cfg.expert_policy;
    if (spec.command == "run" && policy.kind == ExpertPolicy::Kind::Interactive) {
        err << "--policy: interactive runs are driven through the serve subcommand\n";
        return 2;
    }
    if (spec.command == "serve") {
        ServiceOptions opts;
        opts.generalist = spec.generalist;
        opts.mock = spec.mock;
        opts.static_dir = spec.ui_dir;
        SessionService service(opts);
        out << "listening on " << spec.host << ':' << spec.port << std::endl;
        if (!service.listen(spec.host, spec.port)) {
            err << "error: cannot listen on " << spec.host << ':' << spec.port << '\n';
            return 1;
        }
        return 0;
    }

    if (spec.use_synthetic) spec.data.synthetic = spec.synthetic;
    else spec.data.folder = spec.data_dir;
    spec.data.prompts = spec.synthetic.prompts;

    if (spec.command == "gen-data") {
        if (!spec.use_synthetic) {
            err << "--data: gen-data only generates synthetic datasets\n";
            return 2;
        }
        if (spec.out.empty()) {
            err << "--out: gen-data needs an output directory\n";
            return 2;
        }
        const auto samples = generate_synthetic(spec.synthetic);
        save_folder(samples, spec.out);
        out << "wrote " << samples.size() << " samples to " << spec.out << '\n';
        return 0;
    }

    const auto samples = spec.data.load();
    auto generalist = make_generalist(spec.generalist, spec.mock, std::chrono::milliseconds(spec.timeout_ms));

    if (spec.command == "ablate") {
        const auto rows = run_ablation(cfg, samples, generalist);
        print_ablation(rows, out);
        if (!spec.out.empty()) {
            std::ostringstream table;
            print_ablation(rows, table);
            write_file(spec.out, table.str());
        }
        return 0;
    }

    Engine engine(cfg, generalist);
    if (!spec.checkpoint_in.empty()) {
        auto ck = load_checkpoint(spec.checkpoint_in);
        engine.restore(std::move(ck.params), std::move(ck.optimizer));
    }
    const auto records = run_stream(engine, samples);
    if (!spec.out.empty()) write_report(records, std::filesystem::path(spec.out));
    if (!spec.checkpoint_out.empty()) save_checkpoint(spec.checkpoint_out, engine.params(), engine.optimizer());
    print_summary(summarize(records), out);
    return 0;
}

} // namespace detail

/// Entry point behind the auxol binary. Returns 0 on success, 2 on usage
/// errors, 1 on runtime errors.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunSpec spec;
    auto& cfg = spec.engine;
    std::string policy = "full", update_mode = "online-batch", fusion_mode = "adaptive", prompt = "box";

    CLI::App app{"Streaming test-time online learning for promptable segmentation", "auxol"};
    app.set_config("--config", "", "key=value file; command-line flags take precedence");
    app.require_subcommand(1);

    auto* source = app.add_option_group("source");
    source->add_flag("--synthetic", spec.use_synthetic, "generate a synthetic stream");
    source->add_option("--data", spec.data_dir, "folder with images/ and masks/")->check(CLI::ExistingDirectory);
    source->require_option(0, 1);

    app.add_option("--count", spec.synthetic.count, "synthetic sample count")->check(CLI::PositiveNumber);
    app.add_option("--seed", spec.synthetic.seed, "seed for data, mock generalist and specialist init");
    app.add_option("--prompt", prompt)->check(CLI::IsMember({"box", "point", "both"}));
    app.add_option("--policy", policy, "full | none | fraction=P | threshold=T | interactive")->check(detail::policy_validator());
    app.add_option("--k", cfg.k, "online batch capacity")->check(CLI::PositiveNumber);
    app.add_option("--K", cfg.K, "alpha tracker window")->check(CLI::PositiveNumber);
    app.add_option("--grid-points", cfg.grid_points, "alpha search grid size")->check(CLI::Range(2, 100001));
    app.add_option("--lr", cfg.lr)->check(CLI::NonNegativeNumber);
    app.add_option("--weight-decay", cfg.weight_decay)->check(CLI::NonNegativeNumber);
    app.add_option("--steps-per-update", cfg.steps_per_update)->check(CLI::PositiveNumber);
    app.add_option("--update-mode", update_mode)->check(CLI::IsMember({"online-batch", "single-sample"}));
    app.add_option("--fusion-mode", fusion_mode)->check(CLI::IsMember({"adaptive", "fixed"}));
    app.add_option("--fixed-alpha", cfg.fixed_alpha)->check(CLI::Range(0.0, 1.0));
    app.add_flag("--refine-input", cfg.refine_input, "feed generalist logits as a second specialist channel");
    app.add_flag("--per-prompt-tracker", cfg.per_prompt_tracker, "separate alpha trackers for box and point prompts");
    app.add_option("--patch-size", cfg.patch_size)->check(CLI::Range(8, 1024));
    app.add_option("--generalist", spec.generalist)->check(detail::generalist_validator());
    app.add_option("--timeout-ms", spec.timeout_ms, "remote generalist timeout")->check(CLI::PositiveNumber);
    app.add_option("--out", spec.out, "report CSV (run), table CSV (ablate) or dataset directory (gen-data)");
    app.add_option("--checkpoint-out", spec.checkpoint_out);
    app.add_option("--checkpoint-in", spec.checkpoint_in)->check(CLI::ExistingFile);

    app.add_subcommand("run", "run a stream with a simulated expert")->fallthrough();
    app.add_subcommand("ablate", "update mode x fusion mode comparison on one stream")->fallthrough();
    auto* serve = app.add_subcommand("serve", "start the interactive session server")->fallthrough();
    serve->add_option("--host", spec.host);
    serve->add_option("--port", spec.port)->check(CLI::Range(0, 65535));
    serve->add_option("--ui-dir", spec.ui_dir, "static files served at /")->check(CLI::ExistingDirectory);
    app.add_subcommand("gen-data", "write a synthetic dataset folder")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    spec.command = app.get_subcommands().front()->get_name();
    if (spec.command != "serve" && !spec.use_synthetic && spec.data_dir.empty()) {
        err << "--synthetic or --data is required\n";
        return 2;
    }
    try {
        cfg.expert_policy = ExpertPolicy::parse(policy);
        cfg.update_mode = update_mode_from_string(update_mode);
        cfg.adaptive_fusion = fusion_mode == "adaptive";
        cfg.seed = spec.synthetic.seed;
        spec.mock.seed = spec.synthetic.seed;
        spec.synthetic.prompts = prompt_mode_from_string(prompt);
        cfg.validate();
    } catch (const Error& e) {
        err << "invalid configuration: " << e.what() << '\n';
        return 2;
    }

    try {
        return detail::execute(spec, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace auxol
