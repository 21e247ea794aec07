// SPDX-License-Identifier: Apache-2.0

#include "rsit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace rsit::kernels {

GradcheckReport gradcheck(LanguageModel& model, const FeatureStack& stack,
                          std::span<const int> language_tokens, std::span<const int> targets,
                          const std::set<std::string>& names, const GradcheckOptions& options) {
    GradcheckReport report;
    report.threshold = options.threshold;

    model.forward(stack, language_tokens, targets);
    GradMap analytic = model.backward();
    if (options.corrupt && !names.empty()) {
        // Negative control: skew one analytic gradient so the check must fail.
        Tensor& g = analytic.at(*names.begin());
        g[0] += 1.0;
    }

    for (const auto& name : names) {
        GradcheckRow row;
        row.name = name;
        Tensor& tensor = model.params().get(name).tensor;
        row.elements = tensor.numel();

        const auto it = analytic.find(name);
        if (it == analytic.end()) {
            row.max_rel_error = std::numeric_limits<double>::infinity();
            row.pass = false;
            report.rows.push_back(std::move(row));
            continue;
        }

        double max_err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < tensor.numel(); ++i) {
            const double saved = tensor[i];
            tensor[i] = saved + options.step;
            const double up = model.forward(stack, language_tokens, targets);
            tensor[i] = saved - options.step;
            const double down = model.forward(stack, language_tokens, targets);
            tensor[i] = saved;

            const double numeric = (up - down) / (2.0 * options.step);
            const double a = it->second[i];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                finite = false;
                break;
            }
            const double rel =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            max_err = std::max(max_err, rel);
        }
        row.max_rel_error = finite ? max_err : std::numeric_limits<double>::infinity();
        row.pass = finite && max_err <= options.threshold;
        report.rows.push_back(std::move(row));
    }

    // Restore the cached forward state for the unperturbed parameters.
    model.forward(stack, language_tokens, targets);
    return report;
}

std::string gradcheck_report_to_string(const GradcheckReport& report) {
    std::ostringstream out;
    out << "# threshold: " << report.threshold << "\n";
    out << "parameter\telements\tmax_rel_error\tstatus\n";
    char buf[64];
    for (const auto& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.3e", row.max_rel_error);
        out << row.name << '\t' << row.elements << '\t' << buf << '\t'
            << (row.pass ? "pass" : "FAIL") << '\n';
    }
    return out.str();
}

void write_gradcheck_report(const std::filesystem::path& file, const GradcheckReport& report) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw KernelError("cannot write gradcheck report: " + file.string());
    out << gradcheck_report_to_string(report);
}

}  // namespace rsit::kernels
