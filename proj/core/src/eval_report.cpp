// SPDX-License-Identifier: Apache-2.0

#include "rsit/eval_report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rsit/strings.hpp"
#include "rsit/text_metrics.hpp"

namespace rsit::metrics {

std::string report_to_string(const EvalReport& report) {
    std::ostringstream out;
    out << "# seed: " << report.seed << "\n";
    for (const auto& [name, n] : report.counts) out << "# " << name << ": " << n << "\n";
    char buf[64];
    for (const auto& [name, value] : report.values) {
        std::snprintf(buf, sizeof(buf), "%.6f", value);
        out << name << '\t' << buf << '\n';
    }
    return out.str();
}

void write_report(const std::filesystem::path& file, const EvalReport& report) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw MetricsError("cannot write report: " + file.string());
    out << report_to_string(report);
}

EvalReport read_report(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw MetricsError("cannot open report: " + file.string());
    EvalReport report;
    std::string line;
    while (std::getline(in, line)) {
        const std::string trimmed = strings::trim(line);
        if (trimmed.empty()) continue;
        if (trimmed[0] == '#') {
            const auto colon = trimmed.find(':');
            if (colon != std::string::npos) {
                const std::string key = strings::trim(trimmed.substr(1, colon - 1));
                const std::string value = strings::trim(trimmed.substr(colon + 1));
                if (key == "seed") report.seed = std::stoull(value);
                else report.add_count(key, std::stoll(value));
            }
            continue;
        }
        const auto tab = trimmed.find('\t');
        if (tab == std::string::npos) throw MetricsError("malformed report line: " + trimmed);
        report.add(trimmed.substr(0, tab), std::stod(trimmed.substr(tab + 1)));
    }
    return report;
}

}  // namespace rsit::metrics
