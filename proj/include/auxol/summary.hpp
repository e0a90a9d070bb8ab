#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>

#include "auxol/record.hpp"

namespace auxol {

/// Mean of an optional field over records [first, last); nullopt if no record has it.
inline std::optional<double> mean_of(std::span<const StepRecord> records,
                                     const std::function<std::optional<double>(const StepRecord&)>& field,
                                     std::size_t first = 0, std::size_t last = static_cast<std::size_t>(-1)) {
    last = std::min(last, records.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = first; i < last; ++i)
        if (auto v = field(records[i])) {
            sum += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

struct RunSummary {
    std::size_t steps = 0;
    std::size_t rectified = 0;
    std::optional<double> mean_dsc_generalist;
    std::optional<double> mean_dsc_fused;
    std::optional<double> mean_hd_fused;
    std::optional<double> mean_dsc_fused_last_quarter;

    bool operator==(const RunSummary&) const = default;
};

inline RunSummary summarize(std::span<const StepRecord> records) {
    RunSummary s;
    s.steps = records.size();
    for (const auto& r : records) s.rectified += r.rectified;
    s.mean_dsc_generalist = mean_of(records, [](const StepRecord& r) { return r.dsc_generalist; });
    s.mean_dsc_fused = mean_of(records, [](const StepRecord& r) { return r.dsc_fused; });
    s.mean_hd_fused = mean_of(records, [](const StepRecord& r) { return r.hd_fused; });
    s.mean_dsc_fused_last_quarter =
        mean_of(records, [](const StepRecord& r) { return r.dsc_fused; }, records.size() * 3 / 4);
    return s;
}

inline void print_summary(const RunSummary& s, std::ostream& out) {
    auto line = [&](const char* key, const std::optional<double>& v) {
        out << key << ": " << (v ? detail::fixed6(*v) : std::string("n/a")) << '\n';
    };
    out << "steps: " << s.steps << '\n';
    out << "rectified: " << s.rectified << '\n';
    line("mean_dsc_generalist", s.mean_dsc_generalist);
    line("mean_dsc_fused", s.mean_dsc_fused);
    line("mean_hd_fused", s.mean_hd_fused);
    line("mean_dsc_fused_last_quarter", s.mean_dsc_fused_last_quarter);
}

} // namespace auxol
