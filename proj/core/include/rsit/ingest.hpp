// SPDX-License-Identifier: Apache-2.0
//
// Parsers turning source annotation files into the canonical SourceSample
// intermediate. Per-record problems become Diagnostics rather than
// exceptions: every input row either yields a sample or at least one
// diagnostic, never a silent drop. I/O failures (unreadable files) throw.
//
// Formats:
//   - classification: CSV with header "id,image_path,modality,width,height,category"
//   - caption / vqa / grounding: one JSON object per line (see README)
//   - detection: DOTA text grammar, one instance per line
//     "x1 y1 x2 y2 x3 y3 x4 y4 category difficult", with optional
//     "imagesource:" / "gsd:" metadata lines

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rsit/geometry.hpp"

namespace rsit::ingest {

class IngestError : public std::runtime_error {
public:
    explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

enum class Modality { optical, sar, infrared };

std::optional<Modality> modality_from_string(std::string_view s);
// Storage form: "optical" / "sar" / "infrared".
std::string_view to_string(Modality m);
// Presentation form used in stats tables: "optical" / "SAR" / "infrared".
std::string_view display_name(Modality m);

enum class Severity { warning, error };

struct Diagnostic {
    std::string sample_id;  // empty when the sample is unknown
    Severity severity = Severity::error;
    std::string message;
    std::string file;
    int line = 0;  // 1-based; 0 refers to the file as a whole
};

struct ClassificationPayload {
    std::string category;
    std::vector<std::string> reference_categories;  // distinct, sorted
    friend bool operator==(const ClassificationPayload&, const ClassificationPayload&) = default;
};

struct CaptionsPayload {
    std::vector<std::string> captions;  // file order preserved
    friend bool operator==(const CaptionsPayload&, const CaptionsPayload&) = default;
};

struct QaPair {
    std::string question;
    std::string answer;
    friend bool operator==(const QaPair&, const QaPair&) = default;
};

struct VqaPayload {
    std::vector<QaPair> pairs;
    friend bool operator==(const VqaPayload&, const VqaPayload&) = default;
};

using BoxGeometry = std::variant<geom::HorizontalBox, geom::OrientedBox>;

struct DetectionInstance {
    std::string category;
    BoxGeometry box;
    bool difficult = false;
    friend bool operator==(const DetectionInstance&, const DetectionInstance&) = default;
};

struct DetectionPayload {
    std::vector<DetectionInstance> instances;
    friend bool operator==(const DetectionPayload&, const DetectionPayload&) = default;
};

struct GroundingItem {
    std::string expression;
    geom::HorizontalBox box;
    friend bool operator==(const GroundingItem&, const GroundingItem&) = default;
};

struct GroundingPayload {
    std::vector<GroundingItem> items;
    friend bool operator==(const GroundingPayload&, const GroundingPayload&) = default;
};

using Payload = std::variant<ClassificationPayload, CaptionsPayload, VqaPayload,
                             DetectionPayload, GroundingPayload>;

struct SourceSample {
    std::string id;
    std::string image_path;
    Modality modality = Modality::optical;
    geom::ImageSize image_size{};
    Payload payload;
    friend bool operator==(const SourceSample&, const SourceSample&) = default;
};

struct ParseResult {
    std::vector<SourceSample> samples;
    std::vector<Diagnostic> diagnostics;

    bool has_errors() const {
        for (const auto& d : diagnostics) {
            if (d.severity == Severity::error) return true;
        }
        return false;
    }
};

ParseResult parse_classification_manifest(const std::filesystem::path& file);
ParseResult parse_caption_file(const std::filesystem::path& file);
ParseResult parse_vqa_file(const std::filesystem::path& file);
// Grounding boxes outside the image: strict -> error diagnostic, entry
// dropped; lenient -> kept as-is (clamped later during normalization).
ParseResult parse_grounding_file(const std::filesystem::path& file,
                                 geom::BoundsMode mode = geom::BoundsMode::strict);

struct DotaImageMeta {
    std::string id;
    std::string image_path;
    Modality modality = Modality::optical;
    geom::ImageSize image_size{};
};

// One Detection sample per annotation file.
ParseResult parse_dota_annotation(const std::filesystem::path& file, const DotaImageMeta& meta);

// Corpus-level cleaning pass: duplicate ids, duplicate captions per image,
// out-of-bounds boxes, empty payloads.
std::vector<Diagnostic> validate_corpus(std::span<const SourceSample> samples);

// Canonical writers; parse_*_file of the written file reproduces the input
// samples exactly.
void write_caption_file(const std::filesystem::path& file, std::span<const SourceSample> samples);
void write_vqa_file(const std::filesystem::path& file, std::span<const SourceSample> samples);
void write_grounding_file(const std::filesystem::path& file,
                          std::span<const SourceSample> samples);

std::string format_diagnostic(const Diagnostic& d);

}  // namespace rsit::ingest
