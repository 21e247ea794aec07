// SPDX-License-Identifier: Apache-2.0
//
// Synthesizes "perfect" prediction files from ground-truth records: every
// answer, caption, box, and detection copied verbatim, detection scores 1.0.

#pragma once

#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "rsit/compiler.hpp"
#include "rsit/eval_io.hpp"

namespace rsit::testing {

inline void write_perfect_predictions(const std::vector<compiler::InstructionRecord>& records,
                                      const std::filesystem::path& dir) {
    using nlohmann::json;
    std::ofstream cls(dir / "pred_cls.jsonl"), vqa(dir / "pred_vqa.jsonl"),
        cap(dir / "pred_cap.jsonl"), ground(dir / "pred_ground.jsonl"),
        det(dir / "pred_det.jsonl"), scores(dir / "scores.txt");
    for (const auto& rec : records) {
        json obj;
        obj["id"] = rec.id;
        switch (rec.task) {
            case compiler::Task::classification:
                obj["answer"] = rec.turns[1].text;
                cls << obj.dump() << "\n";
                break;
            case compiler::Task::vqa: {
                json answers = json::array();
                for (std::size_t r = 0; r < rec.round_count(); ++r)
                    answers.push_back(rec.turns[2 * r + 1].text);
                obj["answers"] = std::move(answers);
                vqa << obj.dump() << "\n";
                break;
            }
            case compiler::Task::caption:
            case compiler::Task::region_caption:
                obj["caption"] = rec.turns[1].text;
                cap << obj.dump() << "\n";
                break;
            case compiler::Task::grounding_locate: {
                json boxes = json::array();
                for (std::size_t r = 0; r < rec.round_count(); ++r)
                    boxes.push_back(rec.turns[2 * r + 1].text);
                obj["boxes"] = std::move(boxes);
                ground << obj.dump() << "\n";
                break;
            }
            case compiler::Task::detection_hbb:
            case compiler::Task::detection_obb: {
                json detections = json::array();
                std::size_t index = 0;
                for (const auto& inst : evalio::parse_instance_list(rec.turns[1].text)) {
                    detections.push_back({{"category", inst.category},
                                          {"box", compiler::serialize_box_text(inst.box)}});
                    scores << rec.id << " " << index++ << " 1.0\n";
                }
                obj["detections"] = std::move(detections);
                det << obj.dump() << "\n";
                break;
            }
        }
    }
}

}  // namespace rsit::testing
