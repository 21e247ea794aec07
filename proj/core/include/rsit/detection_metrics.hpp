// SPDX-License-Identifier: Apache-2.0
//
// Grounding and detection metrics over aligned prediction/truth pairs.
// Unparseable model outputs never abort an evaluation: a missing predicted
// box scores IoU 0 and is tallied in the report.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rsit/geometry.hpp"
#include "rsit/text_metrics.hpp"  // MetricsError

namespace rsit::metrics {

inline constexpr double kGroundingThresholds[] = {0.5, 0.6, 0.7, 0.8, 0.9};

struct GroundingPair {
    std::optional<geom::HorizontalBox> predicted;  // nullopt: unparseable output
    geom::HorizontalBox truth;
};

struct GroundingReport {
    double pr_at[5] = {0, 0, 0, 0, 0};  // Pr@0.5 .. Pr@0.9
    double mean_iou = 0.0;
    double cum_iou = 0.0;  // sum of intersections over sum of unions
    std::size_t pairs = 0;
    std::size_t unparseable = 0;
};

GroundingReport grounding_metrics(std::span<const GroundingPair> pairs);

using EvalBox = std::variant<geom::HorizontalBox, geom::OrientedBox>;

// IoU between eval boxes under a fixed comparison kind: hbb collapses
// oriented boxes to their extents, obb lifts axis-aligned boxes to quads.
double eval_box_iou(const EvalBox& a, const EvalBox& b, geom::BoxKind kind);

struct DetectionPrediction {
    std::string image_id;
    std::size_t index = 0;  // position within this image's prediction list
    std::string category;
    std::optional<EvalBox> box;  // nullopt: unparseable output
    std::optional<double> score;
};

struct GroundTruthBox {
    std::string image_id;
    std::string category;
    EvalBox box;
};

// Single-category average precision: predictions sorted by score descending
// (ties keep input order), each greedily matched to the unmatched ground
// truth of its image with the highest IoU >= threshold; area under the
// all-point-interpolated precision/recall curve.
double detection_ap(std::span<const DetectionPrediction> predictions,
                    std::span<const GroundTruthBox> ground_truths, double iou_threshold,
                    geom::BoxKind kind);

using ScoreMap = std::map<std::pair<std::string, std::size_t>, double>;

// Attaches external confidence scores keyed by (image id, prediction
// index). strict: a missing score is an error; lenient: it becomes 0.
void attach_external_scores(std::vector<DetectionPrediction>& predictions,
                            const ScoreMap& scores, bool strict);

// Keeps predictions with score >= tau. Predictions must carry scores.
std::vector<DetectionPrediction> filter_by_score(std::vector<DetectionPrediction> predictions,
                                                 double tau);

}  // namespace rsit::metrics
