#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "auxol/grid.hpp"

namespace auxol {

/// One log row per (sample, prompt) step.
struct StepRecord {
    std::uint64_t step = 0;
    std::int64_t sample_id = 0;
    PromptKind prompt_kind = PromptKind::Box;
    // Quality against the reference mask (ground truth when known, else the
    // rectification); absent when neither exists.
    std::optional<double> dsc_generalist;
    std::optional<double> dsc_aux;
    std::optional<double> dsc_fused;
    std::optional<double> hd_fused;
    double alpha_used = 0.5;
    std::optional<double> alpha_star;
    bool rectified = false;
    std::size_t batch_len = 0;
    std::optional<double> batch_loss;

    bool operator==(const StepRecord&) const = default;
};

inline constexpr const char* kReportHeader =
    "step,sample_id,prompt_kind,dsc_generalist,dsc_aux,dsc_fused,hd_fused,alpha_used,alpha_star,rectified,batch_len,"
    "batch_loss";

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string fixed6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

} // namespace detail

inline std::string report_row(const StepRecord& r) {
    std::string s;
    s += std::to_string(r.step) + ',';
    s += std::to_string(r.sample_id) + ',';
    s += std::string(to_string(r.prompt_kind)) + ',';
    s += detail::fixed6(r.dsc_generalist) + ',';
    s += detail::fixed6(r.dsc_aux) + ',';
    s += detail::fixed6(r.dsc_fused) + ',';
    s += detail::fixed6(r.hd_fused) + ',';
    s += detail::fixed6(r.alpha_used) + ',';
    s += detail::fixed6(r.alpha_star) + ',';
    s += r.rectified ? "1," : "0,";
    s += std::to_string(r.batch_len) + ',';
    s += detail::fixed6(r.batch_loss);
    return s;
}

inline void write_report(std::span<const StepRecord> records, std::ostream& out) {
    out << kReportHeader << '\n';
    for (const auto& r : records) out << report_row(r) << '\n';
}

inline std::string report_csv(std::span<const StepRecord> records) {
    std::ostringstream os;
    write_report(records, os);
    return os.str();
}

inline void write_report(std::span<const StepRecord> records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IOFailure("cannot open report for writing: " + path.string());
    write_report(records, out);
    out.flush();
    if (!out) throw IOFailure("failed writing report: " + path.string());
}

inline nlohmann::json to_json(const StepRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"step", r.step},
            {"sample_id", r.sample_id},
            {"prompt_kind", std::string(to_string(r.prompt_kind))},
            {"dsc_generalist", opt(r.dsc_generalist)},
            {"dsc_aux", opt(r.dsc_aux)},
            {"dsc_fused", opt(r.dsc_fused)},
            {"hd_fused", opt(r.hd_fused)},
            {"alpha_used", r.alpha_used},
            {"alpha_star", opt(r.alpha_star)},
            {"rectified", r.rectified},
            {"batch_len", r.batch_len},
            {"batch_loss", opt(r.batch_loss)}};
}

} // namespace auxol
