// SPDX-License-Identifier: Apache-2.0

#include "rsit/eval_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rsit/strings.hpp"

namespace rsit::evalio {

namespace {

using compiler::InstructionRecord;
using compiler::Task;
using nlohmann::json;

std::vector<json> read_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw metrics::MetricsError("cannot open prediction file: " + file.string());
    std::vector<json> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (strings::trim(line).empty()) continue;
        json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("id"))
            throw metrics::MetricsError(file.string() + ":" + std::to_string(lineno) +
                                        ": malformed prediction line");
        out.push_back(std::move(obj));
    }
    return out;
}

// Index predictions by id; a duplicated or unknown id is an alignment error.
std::map<std::string, json> index_predictions(const std::vector<json>& lines,
                                              std::span<const InstructionRecord> records) {
    std::map<std::string, json> by_id;
    for (const auto& obj : lines) {
        const std::string id = obj.at("id").get<std::string>();
        if (!by_id.emplace(id, obj).second)
            throw AlignmentError(id, "duplicate prediction for id " + id);
    }
    std::map<std::string, bool> known;
    for (const auto& rec : records) known[rec.id] = true;
    for (const auto& obj : lines) {
        const std::string id = obj.at("id").get<std::string>();
        if (!known.count(id)) throw AlignmentError(id, "prediction for unknown id " + id);
    }
    return by_id;
}

const json& prediction_for(const std::map<std::string, json>& by_id, const std::string& id) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw AlignmentError(id, "missing prediction for id " + id);
    return it->second;
}

std::vector<InstructionRecord> records_for_tasks(std::span<const InstructionRecord> records,
                                                 std::initializer_list<Task> tasks) {
    std::vector<InstructionRecord> out;
    for (const auto& rec : records) {
        if (std::find(tasks.begin(), tasks.end(), rec.task) != tasks.end()) out.push_back(rec);
    }
    if (out.empty()) throw metrics::MetricsError("no records with the requested task");
    return out;
}

std::optional<geom::HorizontalBox> hbb_from_normalized_text(std::string_view text) {
    const auto parsed = compiler::try_parse_box_text(text);
    if (!parsed || parsed->kind != geom::BoxKind::hbb) return std::nullopt;
    try {
        return geom::make_hbb(parsed->values[0], parsed->values[1], parsed->values[2],
                              parsed->values[3]);
    } catch (const geom::GeometryError&) {
        return std::nullopt;  // degenerate after quantization
    }
}

std::optional<metrics::EvalBox> eval_box_from_text(std::string_view text) {
    const auto parsed = compiler::try_parse_box_text(text);
    if (!parsed) return std::nullopt;
    if (parsed->kind == geom::BoxKind::hbb) {
        const auto hbb = hbb_from_normalized_text(text);
        if (!hbb) return std::nullopt;
        return metrics::EvalBox{*hbb};
    }
    geom::OrientedBox quad;
    for (int i = 0; i < 4; ++i)
        quad.corners[i] = {parsed->values[2 * i], parsed->values[2 * i + 1]};
    try {
        geom::obb_area(quad);  // validates convexity
    } catch (const geom::GeometryError&) {
        return std::nullopt;
    }
    return metrics::EvalBox{quad};
}

}  // namespace

metrics::ScoreMap read_score_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw metrics::MetricsError("cannot open score file: " + file.string());
    metrics::ScoreMap scores;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string trimmed = strings::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto tokens = strings::split_ws(trimmed);
        if (tokens.size() != 3)
            throw metrics::MetricsError(file.string() + ":" + std::to_string(lineno) +
                                        ": expected 'id index score'");
        try {
            const std::size_t index = std::stoul(tokens[1]);
            const double score = std::stod(tokens[2]);
            scores[{tokens[0], index}] = score;
        } catch (const std::exception&) {
            throw metrics::MetricsError(file.string() + ":" + std::to_string(lineno) +
                                        ": malformed score line");
        }
    }
    return scores;
}

std::vector<InstanceText> parse_instance_list(std::string_view text) {
    std::vector<InstanceText> out;
    std::size_t start = 0;
    const std::string str(text);
    while (start < str.size()) {
        std::size_t end = str.find("; ", start);
        if (end == std::string::npos) end = str.size();
        const std::string item = strings::trim(str.substr(start, end - start));
        start = end + 2;
        if (item.empty()) continue;
        const auto bracket = item.rfind('[');
        if (bracket == std::string::npos || bracket == 0)
            throw metrics::MetricsError("malformed instance item: '" + item + "'");
        InstanceText inst;
        inst.category = strings::trim(item.substr(0, bracket));
        inst.box = compiler::parse_box_text(item.substr(bracket));
        out.push_back(std::move(inst));
    }
    return out;
}

metrics::EvalReport eval_caption(std::span<const InstructionRecord> records,
                                 const std::filesystem::path& predictions) {
    const auto subset = records_for_tasks(records, {Task::caption, Task::region_caption});
    const auto by_id = index_predictions(read_jsonl(predictions), subset);

    metrics::CaptionEvalSet set;
    for (const auto& rec : subset) {
        const json& pred = prediction_for(by_id, rec.id);
        if (!pred.contains("caption") || !pred["caption"].is_string())
            throw AlignmentError(rec.id, "prediction for " + rec.id + " lacks 'caption'");
        metrics::CaptionEvalItem item;
        item.candidate = pred["caption"].get<std::string>();
        for (std::size_t r = 0; r < rec.round_count(); ++r)
            item.references.push_back(rec.turns[2 * r + 1].text);
        set.push_back(std::move(item));
    }

    metrics::EvalReport report;
    report.add_count("images", static_cast<std::int64_t>(set.size()));
    for (int n = 1; n <= 4; ++n)
        report.add("bleu" + std::to_string(n), metrics::bleu(set, n));
    report.add("rouge_l", metrics::rouge_l(set));
    report.add("meteor_lite", metrics::meteor_lite(set));
    const double cider = metrics::cider_d(set);
    report.add("cider_d", cider);
    report.add("cider_d_x100", cider * 100.0);
    return report;
}

namespace {

metrics::EvalReport accuracy_report(std::span<const InstructionRecord> records,
                                    const std::filesystem::path& predictions,
                                    metrics::AccuracyMode mode) {
    const bool classification = mode == metrics::AccuracyMode::classification;
    const auto subset = records_for_tasks(
        records, classification ? std::initializer_list<Task>{Task::classification}
                                : std::initializer_list<Task>{Task::vqa});
    const auto by_id = index_predictions(read_jsonl(predictions), subset);

    std::vector<std::string> preds, truths;
    for (const auto& rec : subset) {
        const json& pred = prediction_for(by_id, rec.id);
        if (classification) {
            if (!pred.contains("answer") || !pred["answer"].is_string())
                throw AlignmentError(rec.id, "prediction for " + rec.id + " lacks 'answer'");
            preds.push_back(pred["answer"].get<std::string>());
            truths.push_back(rec.turns[1].text);
        } else {
            if (!pred.contains("answers") || !pred["answers"].is_array())
                throw AlignmentError(rec.id, "prediction for " + rec.id + " lacks 'answers'");
            if (pred["answers"].size() != rec.round_count())
                throw AlignmentError(rec.id, "answer count mismatch for id " + rec.id);
            for (std::size_t r = 0; r < rec.round_count(); ++r) {
                preds.push_back(pred["answers"][r].get<std::string>());
                truths.push_back(rec.turns[2 * r + 1].text);
            }
        }
    }

    metrics::EvalReport report;
    report.add_count(classification ? "images" : "pairs",
                     static_cast<std::int64_t>(preds.size()));
    report.add("accuracy", metrics::answer_accuracy(preds, truths, mode));
    return report;
}

}  // namespace

metrics::EvalReport eval_vqa(std::span<const InstructionRecord> records,
                             const std::filesystem::path& predictions) {
    return accuracy_report(records, predictions, metrics::AccuracyMode::vqa);
}

metrics::EvalReport eval_classification(std::span<const InstructionRecord> records,
                                        const std::filesystem::path& predictions) {
    return accuracy_report(records, predictions, metrics::AccuracyMode::classification);
}

metrics::EvalReport eval_grounding(std::span<const InstructionRecord> records,
                                   const std::filesystem::path& predictions) {
    const auto subset = records_for_tasks(records, {Task::grounding_locate});
    const auto by_id = index_predictions(read_jsonl(predictions), subset);

    std::vector<metrics::GroundingPair> pairs;
    for (const auto& rec : subset) {
        const json& pred = prediction_for(by_id, rec.id);
        if (!pred.contains("boxes") || !pred["boxes"].is_array())
            throw AlignmentError(rec.id, "prediction for " + rec.id + " lacks 'boxes'");
        if (pred["boxes"].size() != rec.round_count())
            throw AlignmentError(rec.id, "box count mismatch for id " + rec.id);
        for (std::size_t r = 0; r < rec.round_count(); ++r) {
            metrics::GroundingPair pair;
            const auto truth = hbb_from_normalized_text(rec.turns[2 * r + 1].text);
            if (!truth)
                throw metrics::MetricsError("unparseable truth box in record " + rec.id);
            pair.truth = *truth;
            pair.predicted = pred["boxes"][r].is_string()
                                 ? hbb_from_normalized_text(pred["boxes"][r].get<std::string>())
                                 : std::nullopt;
            pairs.push_back(pair);
        }
    }

    const auto result = metrics::grounding_metrics(pairs);
    metrics::EvalReport report;
    report.add_count("pairs", static_cast<std::int64_t>(result.pairs));
    report.add_count("unparseable", static_cast<std::int64_t>(result.unparseable));
    const char* names[5] = {"pr@0.5", "pr@0.6", "pr@0.7", "pr@0.8", "pr@0.9"};
    for (int t = 0; t < 5; ++t) report.add(names[t], result.pr_at[t]);
    report.add("miou", result.mean_iou);
    report.add("ciou", result.cum_iou);
    return report;
}

metrics::EvalReport eval_detection(std::span<const InstructionRecord> records,
                                   const std::filesystem::path& predictions,
                                   const DetectionEvalOptions& options) {
    const auto subset =
        records_for_tasks(records, {Task::detection_hbb, Task::detection_obb});
    const auto by_id = index_predictions(read_jsonl(predictions), subset);

    std::vector<metrics::GroundTruthBox> gts;
    std::vector<metrics::DetectionPrediction> preds;
    for (const auto& rec : subset) {
        for (const auto& inst : parse_instance_list(rec.turns[1].text)) {
            if (options.category && inst.category != *options.category) continue;
            const auto box = eval_box_from_text(compiler::serialize_box_text(inst.box));
            if (!box)
                throw metrics::MetricsError("degenerate ground-truth box in record " + rec.id);
            gts.push_back({rec.id, inst.category, *box});
        }
        const json& pred = prediction_for(by_id, rec.id);
        if (!pred.contains("detections") || !pred["detections"].is_array())
            throw AlignmentError(rec.id, "prediction for " + rec.id + " lacks 'detections'");
        std::size_t index = 0;
        for (const auto& det : pred["detections"]) {
            metrics::DetectionPrediction p;
            p.image_id = rec.id;
            p.index = index++;
            if (det.contains("category") && det["category"].is_string())
                p.category = det["category"].get<std::string>();
            if (options.category && p.category != *options.category) continue;
            if (det.contains("box") && det["box"].is_string())
                p.box = eval_box_from_text(det["box"].get<std::string>());
            if (det.contains("score") && det["score"].is_number())
                p.score = det["score"].get<double>();
            preds.push_back(std::move(p));
        }
    }

    if (options.score_file) {
        const auto scores = read_score_file(*options.score_file);
        metrics::attach_external_scores(preds, scores, options.strict);
    } else {
        bool missing = false;
        for (auto& p : preds) {
            if (!p.score) missing = true;
        }
        if (missing && options.strict)
            throw metrics::MetricsError(
                "predictions without scores in strict mode (supply --score-file)");
        for (auto& p : preds) {
            if (!p.score) p.score = 0.0;
        }
    }

    const std::size_t before_filter = preds.size();
    if (options.score_threshold) preds = metrics::filter_by_score(preds, *options.score_threshold);

    metrics::EvalReport report;
    report.add_count("ground_truths", static_cast<std::int64_t>(gts.size()));
    report.add_count("predictions", static_cast<std::int64_t>(before_filter));
    report.add_count("kept_predictions", static_cast<std::int64_t>(preds.size()));
    report.add("ap@40", metrics::detection_ap(preds, gts, 0.40, options.kind));
    report.add("ap@50", metrics::detection_ap(preds, gts, 0.50, options.kind));
    if (options.extra_threshold) {
        std::ostringstream name;
        name << "ap@" << static_cast<int>(std::lround(*options.extra_threshold * 100));
        report.add(name.str(), metrics::detection_ap(preds, gts, *options.extra_threshold,
                                                     options.kind));
    }
    return report;
}

}  // namespace rsit::evalio
