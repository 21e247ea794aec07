// SPDX-License-Identifier: Apache-2.0
//
// Converts SourceSamples into multi-turn instruction records, one
// conversion rule per task family, and assembles whole corpora with
// per-(task, source, modality) statistics.
//
// Fixed by this toolchain (the conversion templates pin them down):
//   - box text syntax "[v1,v2,...]", fixed-point with 4 decimals,
//     4 values for HBB, 8 for OBB, all in [0,1];
//   - instance separator "; " and source-order instance listing;
//   - referring-detection and grounding prompt wording.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rsit/geometry.hpp"
#include "rsit/ingest.hpp"

namespace rsit::compiler {

class CompileError : public std::runtime_error {
public:
    explicit CompileError(const std::string& what) : std::runtime_error(what) {}
};

enum class Task {
    classification,
    caption,
    vqa,
    detection_hbb,
    detection_obb,
    grounding_locate,
    region_caption,
};

std::string_view to_string(Task t);
std::optional<Task> task_from_string(std::string_view s);

enum class Role { human, assistant };

struct Turn {
    Role role = Role::human;
    std::string text;
    friend bool operator==(const Turn&, const Turn&) = default;
};

struct InstructionRecord {
    std::string id;
    std::string image_path;
    ingest::Modality modality = ingest::Modality::optical;
    Task task = Task::classification;
    std::vector<Turn> turns;  // alternating human/assistant, human first

    std::size_t round_count() const { return turns.size() / 2; }
    friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

// Prompt templates shared with tests and docs.
namespace prompts {
inline constexpr std::string_view kClassificationPrefix =
    "What is the category of this RS image? Answering the question using a single word or "
    "phrase. Reference categories include ";
inline constexpr std::string_view kCaption =
    "Please provide a one-sentence caption for the provided RS image in detail.";
inline constexpr std::string_view kVqaSuffix =
    "Answering the question using a single word or phrase.";
inline constexpr std::string_view kDetectAllHbb =
    "Detect all objects shown in the RS image and describe using horizontal bounding boxes";
inline constexpr std::string_view kDetectAllObb =
    "Detect all objects shown in the RS image and describe using oriented bounding boxes";
inline constexpr std::string_view kLocateSuffix =
    "Please provide the coordinates of the described target in the RS image.";
}  // namespace prompts

// "[0.0000,0.0000,0.5000,0.5000]" style; 4 or 8 fixed-point values.
std::string serialize_box_text(const geom::NormalizedBox& box);
// Inverse of serialize_box_text. Tolerates surrounding whitespace; values
// are snapped to the 1e-4 grid. Rejects wrong value counts, values outside
// [0,1], and malformed numbers.
std::optional<geom::NormalizedBox> try_parse_box_text(std::string_view text);
geom::NormalizedBox parse_box_text(std::string_view text);  // throws CompileError

enum class BoxFormat { hbb, obb };
enum class GroundingDirection { locate, describe };

InstructionRecord compile_classification(const ingest::SourceSample& sample);
InstructionRecord compile_caption(const ingest::SourceSample& sample);
InstructionRecord compile_vqa(const ingest::SourceSample& sample);
InstructionRecord compile_detection(const ingest::SourceSample& sample, BoxFormat format,
                                    bool referring,
                                    geom::BoundsMode bounds = geom::BoundsMode::strict);
InstructionRecord compile_grounding(const ingest::SourceSample& sample,
                                    GroundingDirection direction,
                                    geom::BoundsMode bounds = geom::BoundsMode::strict);

// --- corpus-level compilation ------------------------------------------

enum class SourceKind { classification, caption, vqa, detection, grounding };

struct DotaFile {
    std::filesystem::path path;
    ingest::DotaImageMeta meta;
};

struct ManifestEntry {
    SourceKind kind = SourceKind::caption;
    std::string name;             // dataset label, the stats "Data" column
    std::filesystem::path path;   // csv / jsonl source (unused for DOTA)
    std::vector<DotaFile> dota_files;
    bool dota = false;
    BoxFormat box_format = BoxFormat::hbb;
    bool referring = false;
    GroundingDirection direction = GroundingDirection::locate;
};

struct CompileOptions {
    bool strict = true;            // strict: reject out-of-bounds boxes, abort on errors
    bool shuffle_rounds = false;   // seed-driven round shuffling, off by default
    std::uint64_t seed = 0;
};

struct CorpusManifest {
    CompileOptions options;
    std::vector<ManifestEntry> entries;
};

// Reads the manifest config (JSON); relative source paths resolve against
// the manifest's directory. Throws CompileError on malformed manifests.
CorpusManifest load_manifest(const std::filesystem::path& file);

struct StatsRow {
    Task task = Task::classification;
    std::string source;
    ingest::Modality modality = ingest::Modality::optical;
    std::size_t count = 0;
};

struct CorpusStats {
    std::vector<StatsRow> rows;  // sorted by (task, source, modality)
    std::size_t total_records = 0;
    std::size_t total_turn_pairs = 0;
    std::uint64_t seed = 0;
};

struct CompiledCorpus {
    std::vector<InstructionRecord> records;  // ordered by (task, entry, sample)
    CorpusStats stats;
    std::vector<ingest::Diagnostic> diagnostics;

    bool has_errors() const {
        for (const auto& d : diagnostics)
            if (d.severity == ingest::Severity::error) return true;
        return false;
    }
};

// Parses every source, validates the corpus, compiles each sample, and
// aggregates stats. Sample-level failures become error diagnostics; the
// caller decides whether strict mode turns them into an abort.
CompiledCorpus compile_corpus(const CorpusManifest& manifest);

// Record serialization: one JSON object per line with fields
// {id, image, modality, task, conversations:[{from, value}]}.
std::string record_to_json_line(const InstructionRecord& record);
InstructionRecord record_from_json_line(std::string_view line);  // throws CompileError
void write_records_file(const std::filesystem::path& file,
                        std::span<const InstructionRecord> records);
std::vector<InstructionRecord> read_records_file(const std::filesystem::path& file);

// Tab-separated stats table mirroring the corpus composition: one row per
// (task, source, modality) with header Task/Data/Size/Type.
void write_stats_file(const std::filesystem::path& file, const CorpusStats& stats);
std::string stats_to_string(const CorpusStats& stats);

}  // namespace rsit::compiler
