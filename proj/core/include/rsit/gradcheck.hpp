// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rsit/model.hpp"

namespace rsit::kernels {

struct GradcheckOptions {
    double step = 1e-5;        // central-difference half step h
    double threshold = 1e-4;   // max relative error allowed per element
    bool corrupt = false;      // debug: perturb one analytic gradient
};

struct GradcheckRow {
    std::string name;
    std::size_t elements = 0;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GradcheckRow> rows;
    double threshold = 0.0;

    bool all_pass() const {
        for (const auto& r : rows) {
            if (!r.pass) return false;
        }
        return !rows.empty();
    }
};

// Central differences against the analytic gradients for every parameter in
// `names`. Relative error per element: |a - n| / max(1, |a|, |n|).
GradcheckReport gradcheck(LanguageModel& model, const FeatureStack& stack,
                          std::span<const int> language_tokens, std::span<const int> targets,
                          const std::set<std::string>& names, const GradcheckOptions& options = {});

std::string gradcheck_report_to_string(const GradcheckReport& report);
void write_gradcheck_report(const std::filesystem::path& file, const GradcheckReport& report);

}  // namespace rsit::kernels
