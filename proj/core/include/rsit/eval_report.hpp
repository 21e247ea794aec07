// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rsit::metrics {

// Ordered metric-name/value bundle emitted as a key/value table file:
// comment lines ("# seed: ...", "# images: ...") then one "name\tvalue"
// line per metric.
struct EvalReport {
    std::vector<std::pair<std::string, double>> values;
    std::vector<std::pair<std::string, std::int64_t>> counts;
    std::uint64_t seed = 0;

    void add(std::string name, double value) { values.emplace_back(std::move(name), value); }
    void add_count(std::string name, std::int64_t n) {
        counts.emplace_back(std::move(name), n);
    }
    std::optional<double> get(std::string_view name) const {
        for (const auto& [k, v] : values) {
            if (k == name) return v;
        }
        return std::nullopt;
    }
};

std::string report_to_string(const EvalReport& report);
void write_report(const std::filesystem::path& file, const EvalReport& report);
EvalReport read_report(const std::filesystem::path& file);

}  // namespace rsit::metrics
