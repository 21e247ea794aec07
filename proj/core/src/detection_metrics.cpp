// SPDX-License-Identifier: Apache-2.0

#include "rsit/detection_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace rsit::metrics {

GroundingReport grounding_metrics(std::span<const GroundingPair> pairs) {
    if (pairs.empty()) throw MetricsError("grounding_metrics: no pairs");

    GroundingReport report;
    report.pairs = pairs.size();

    double iou_sum = 0.0;
    double inter_sum = 0.0;
    double union_sum = 0.0;
    std::size_t hits[5] = {0, 0, 0, 0, 0};

    for (const auto& pair : pairs) {
        double iou = 0.0;
        double inter = 0.0;
        double uni = pair.truth.area();  // missing prediction: empty box
        if (pair.predicted) {
            const auto& p = *pair.predicted;
            const double iw = std::min(p.xmax, pair.truth.xmax) - std::max(p.xmin, pair.truth.xmin);
            const double ih = std::min(p.ymax, pair.truth.ymax) - std::max(p.ymin, pair.truth.ymin);
            inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
            uni = p.area() + pair.truth.area() - inter;
            iou = geom::hbb_iou(p, pair.truth);
        } else {
            ++report.unparseable;
        }
        iou_sum += iou;
        inter_sum += inter;
        union_sum += uni;
        for (int t = 0; t < 5; ++t) {
            if (iou >= kGroundingThresholds[t]) ++hits[t];
        }
    }

    for (int t = 0; t < 5; ++t)
        report.pr_at[t] = static_cast<double>(hits[t]) / static_cast<double>(pairs.size());
    report.mean_iou = iou_sum / static_cast<double>(pairs.size());
    report.cum_iou = union_sum > 0.0 ? inter_sum / union_sum : 0.0;
    return report;
}

double eval_box_iou(const EvalBox& a, const EvalBox& b, geom::BoxKind kind) {
    auto as_hbb = [](const EvalBox& box) {
        if (const auto* obb = std::get_if<geom::OrientedBox>(&box))
            return geom::hbb_from_obb(*obb);
        return std::get<geom::HorizontalBox>(box);
    };
    auto as_obb = [](const EvalBox& box) {
        if (const auto* obb = std::get_if<geom::OrientedBox>(&box)) return *obb;
        const auto& h = std::get<geom::HorizontalBox>(box);
        return geom::OrientedBox{{geom::Point{h.xmin, h.ymin}, geom::Point{h.xmax, h.ymin},
                                  geom::Point{h.xmax, h.ymax}, geom::Point{h.xmin, h.ymax}}};
    };
    if (kind == geom::BoxKind::hbb) return geom::hbb_iou(as_hbb(a), as_hbb(b));
    return geom::obb_iou(as_obb(a), as_obb(b));
}

double detection_ap(std::span<const DetectionPrediction> predictions,
                    std::span<const GroundTruthBox> ground_truths, double iou_threshold,
                    geom::BoxKind kind) {
    if (ground_truths.empty())
        throw MetricsError("detection_ap: no ground truths (recall undefined)");
    for (const auto& p : predictions) {
        if (!p.score) throw MetricsError("detection_ap: prediction without score");
    }

    std::unordered_map<std::string, std::vector<std::size_t>> gt_by_image;
    for (std::size_t i = 0; i < ground_truths.size(); ++i)
        gt_by_image[ground_truths[i].image_id].push_back(i);

    std::vector<std::size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return *predictions[a].score > *predictions[b].score;
    });

    std::vector<bool> gt_matched(ground_truths.size(), false);
    const double total_gt = static_cast<double>(ground_truths.size());

    std::vector<double> precision(order.size());
    std::vector<bool> is_tp(order.size(), false);
    std::size_t tp = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto& pred = predictions[order[rank]];
        double best_iou = 0.0;
        std::size_t best_gt = 0;
        bool found = false;
        if (pred.box) {
            const auto it = gt_by_image.find(pred.image_id);
            if (it != gt_by_image.end()) {
                for (const std::size_t gi : it->second) {
                    if (gt_matched[gi]) continue;
                    const double iou = eval_box_iou(*pred.box, ground_truths[gi].box, kind);
                    if (iou > best_iou) {
                        best_iou = iou;
                        best_gt = gi;
                        found = true;
                    }
                }
            }
        }
        if (found && best_iou >= iou_threshold) {
            gt_matched[best_gt] = true;
            is_tp[rank] = true;
            ++tp;
        }
        precision[rank] = static_cast<double>(tp) / static_cast<double>(rank + 1);
    }

    // All-point interpolation: every true positive contributes one 1/N_gt
    // recall step at the best precision achieved at or after its rank.
    std::vector<double> best_later(precision);
    for (std::size_t i = best_later.size(); i-- > 1;)
        best_later[i - 1] = std::max(best_later[i - 1], best_later[i]);
    double ap = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (is_tp[rank]) ap += best_later[rank] / total_gt;
    }
    return ap;
}

void attach_external_scores(std::vector<DetectionPrediction>& predictions,
                            const ScoreMap& scores, bool strict) {
    for (auto& pred : predictions) {
        const auto it = scores.find({pred.image_id, pred.index});
        if (it != scores.end()) {
            pred.score = it->second;
        } else if (strict) {
            throw MetricsError("missing score for prediction " + pred.image_id + "[" +
                               std::to_string(pred.index) + "]");
        } else {
            pred.score = 0.0;
        }
    }
}

std::vector<DetectionPrediction> filter_by_score(std::vector<DetectionPrediction> predictions,
                                                 double tau) {
    for (const auto& p : predictions) {
        if (!p.score) throw MetricsError("filter_by_score: prediction without score");
    }
    std::erase_if(predictions, [&](const DetectionPrediction& p) { return *p.score < tau; });
    return predictions;
}

}  // namespace rsit::metrics
