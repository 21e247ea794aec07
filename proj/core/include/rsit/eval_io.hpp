// SPDX-License-Identifier: Apache-2.0
//
// Evaluation drivers: read line-delimited prediction files, extract ground
// truth from compiled instruction records, and produce metric reports.
//
// Prediction file schemas (one JSON object per line, keyed by record id):
//   caption    {"id", "caption"}
//   vqa        {"id", "answers": [one per round]}
//   cls        {"id", "answer"}
//   grounding  {"id", "boxes": [box string per round]}
//   detection  {"id", "detections": [{"category", "box", "score"?}]}
// Score files: whitespace-separated "id index score" lines.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "rsit/compiler.hpp"
#include "rsit/detection_metrics.hpp"
#include "rsit/eval_report.hpp"
#include "rsit/text_metrics.hpp"

namespace rsit::evalio {

// Thrown when prediction and truth files disagree (unknown id, missing
// prediction, round-count mismatch); `id` names the first offender.
class AlignmentError : public metrics::MetricsError {
public:
    AlignmentError(const std::string& id, const std::string& what)
        : MetricsError(what), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

metrics::ScoreMap read_score_file(const std::filesystem::path& file);

// Parses one "category [..]; category [..]" instance list (the detection
// records' assistant text).
struct InstanceText {
    std::string category;
    geom::NormalizedBox box;
};
std::vector<InstanceText> parse_instance_list(std::string_view text);

metrics::EvalReport eval_caption(std::span<const compiler::InstructionRecord> records,
                                 const std::filesystem::path& predictions);
metrics::EvalReport eval_vqa(std::span<const compiler::InstructionRecord> records,
                             const std::filesystem::path& predictions);
metrics::EvalReport eval_classification(std::span<const compiler::InstructionRecord> records,
                                        const std::filesystem::path& predictions);
metrics::EvalReport eval_grounding(std::span<const compiler::InstructionRecord> records,
                                   const std::filesystem::path& predictions);

struct DetectionEvalOptions {
    geom::BoxKind kind = geom::BoxKind::hbb;
    std::optional<double> extra_threshold;  // adds "ap@<t>" beside ap@40/ap@50
    std::optional<std::filesystem::path> score_file;
    std::optional<double> score_threshold;
    bool strict = true;  // strict: every prediction must receive a score
    std::optional<std::string> category;  // restrict both sides to one category
};

metrics::EvalReport eval_detection(std::span<const compiler::InstructionRecord> records,
                                   const std::filesystem::path& predictions,
                                   const DetectionEvalOptions& options);

}  // namespace rsit::evalio
