// SPDX-License-Identifier: Apache-2.0

#include "rsit/compiler.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rsit/strings.hpp"

namespace rsit::compiler {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string format_coord(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

geom::HorizontalBox instance_hbb(const ingest::BoxGeometry& box) {
    if (const auto* obb = std::get_if<geom::OrientedBox>(&box)) return geom::hbb_from_obb(*obb);
    return std::get<geom::HorizontalBox>(box);
}

// FNV-1a, used to derive a per-record shuffle stream from the corpus seed.
std::uint64_t hash64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

std::string_view to_string(Task t) {
    switch (t) {
        case Task::classification: return "classification";
        case Task::caption: return "caption";
        case Task::vqa: return "vqa";
        case Task::detection_hbb: return "detection_hbb";
        case Task::detection_obb: return "detection_obb";
        case Task::grounding_locate: return "grounding_locate";
        case Task::region_caption: return "region_caption";
    }
    return "classification";
}

std::optional<Task> task_from_string(std::string_view s) {
    for (const Task t : {Task::classification, Task::caption, Task::vqa, Task::detection_hbb,
                         Task::detection_obb, Task::grounding_locate, Task::region_caption}) {
        if (s == to_string(t)) return t;
    }
    return std::nullopt;
}

std::string serialize_box_text(const geom::NormalizedBox& box) {
    std::string out = "[";
    const auto coords = box.coords();
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (i) out += ",";
        out += format_coord(coords[i]);
    }
    out += "]";
    return out;
}

std::optional<geom::NormalizedBox> try_parse_box_text(std::string_view text) {
    const std::string trimmed = strings::trim(text);
    if (trimmed.size() < 2 || trimmed.front() != '[' || trimmed.back() != ']')
        return std::nullopt;
    const auto tokens = strings::split(trimmed.substr(1, trimmed.size() - 2), ',');
    if (tokens.size() != 4 && tokens.size() != 8) return std::nullopt;

    geom::NormalizedBox box;
    box.kind = tokens.size() == 4 ? geom::BoxKind::hbb : geom::BoxKind::obb;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string tok = strings::trim(tokens[i]);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) return std::nullopt;
        box.values[i] = geom::quantize_coord(v);
    }
    return box;
}

geom::NormalizedBox parse_box_text(std::string_view text) {
    auto box = try_parse_box_text(text);
    if (!box) throw CompileError("unparseable box text: '" + std::string(text) + "'");
    return *box;
}

InstructionRecord compile_classification(const ingest::SourceSample& sample) {
    const auto* payload = std::get_if<ingest::ClassificationPayload>(&sample.payload);
    if (!payload) throw CompileError(sample.id + ": payload is not classification");
    if (payload->reference_categories.empty())
        throw CompileError(sample.id + ": empty reference category list");
    if (std::find(payload->reference_categories.begin(), payload->reference_categories.end(),
                  payload->category) == payload->reference_categories.end()) {
        throw CompileError(sample.id + ": category '" + payload->category +
                           "' missing from reference list");
    }

    InstructionRecord rec{sample.id, sample.image_path, sample.modality, Task::classification, {}};
    rec.turns.push_back({Role::human, std::string(prompts::kClassificationPrefix) +
                                          join(payload->reference_categories, ",")});
    rec.turns.push_back({Role::assistant, payload->category});
    return rec;
}

InstructionRecord compile_caption(const ingest::SourceSample& sample) {
    const auto* payload = std::get_if<ingest::CaptionsPayload>(&sample.payload);
    if (!payload) throw CompileError(sample.id + ": payload is not captions");

    // Duplicate captions collapse to their first occurrence.
    std::vector<std::string> unique;
    for (const auto& c : payload->captions) {
        if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(c);
    }
    if (unique.empty()) throw CompileError(sample.id + ": no captions after cleaning");

    InstructionRecord rec{sample.id, sample.image_path, sample.modality, Task::caption, {}};
    for (const auto& caption : unique) {
        rec.turns.push_back({Role::human, std::string(prompts::kCaption)});
        rec.turns.push_back({Role::assistant, caption});
    }
    return rec;
}

InstructionRecord compile_vqa(const ingest::SourceSample& sample) {
    const auto* payload = std::get_if<ingest::VqaPayload>(&sample.payload);
    if (!payload) throw CompileError(sample.id + ": payload is not vqa");
    if (payload->pairs.empty()) throw CompileError(sample.id + ": no qa pairs");

    InstructionRecord rec{sample.id, sample.image_path, sample.modality, Task::vqa, {}};
    for (const auto& pair : payload->pairs) {
        if (pair.question.empty()) throw CompileError(sample.id + ": empty question");
        std::string question = pair.question;
        if (!strings::ends_with(question, prompts::kVqaSuffix)) {
            question += " ";
            question += prompts::kVqaSuffix;
        }
        rec.turns.push_back({Role::human, std::move(question)});
        rec.turns.push_back({Role::assistant, pair.answer});
    }
    return rec;
}

InstructionRecord compile_detection(const ingest::SourceSample& sample, BoxFormat format,
                                    bool referring, geom::BoundsMode bounds) {
    const auto* payload = std::get_if<ingest::DetectionPayload>(&sample.payload);
    if (!payload) throw CompileError(sample.id + ": payload is not detection");
    if (payload->instances.empty()) throw CompileError(sample.id + ": empty instance list");

    // Per-instance "category [..]" strings, in source order.
    std::vector<std::string> items;
    std::vector<std::string> category_of;
    for (const auto& inst : payload->instances) {
        std::string box_text;
        try {
            if (format == BoxFormat::obb) {
                const auto* obb = std::get_if<geom::OrientedBox>(&inst.box);
                if (!obb)
                    throw CompileError(sample.id +
                                       ": oriented output requested for a horizontal-only instance");
                box_text = serialize_box_text(geom::normalize_box(*obb, sample.image_size, bounds));
            } else {
                box_text = serialize_box_text(
                    geom::normalize_box(instance_hbb(inst.box), sample.image_size, bounds));
            }
        } catch (const geom::GeometryError& e) {
            throw CompileError(sample.id + ": " + e.what());
        }
        items.push_back(inst.category + " " + box_text);
        category_of.push_back(inst.category);
    }

    const Task task = format == BoxFormat::obb ? Task::detection_obb : Task::detection_hbb;
    InstructionRecord rec{sample.id, sample.image_path, sample.modality, task, {}};
    rec.turns.push_back({Role::human, std::string(format == BoxFormat::obb
                                                      ? prompts::kDetectAllObb
                                                      : prompts::kDetectAllHbb)});
    rec.turns.push_back({Role::assistant, join(items, "; ")});

    if (referring) {
        // One extra round per distinct category, first-appearance order.
        std::vector<std::string> categories;
        for (const auto& c : category_of) {
            if (std::find(categories.begin(), categories.end(), c) == categories.end())
                categories.push_back(c);
        }
        for (const auto& cat : categories) {
            std::string prompt = "Detect all the " + cat +
                                 " shown in the RS image and describe using " +
                                 (format == BoxFormat::obb ? "oriented" : "horizontal") +
                                 " bounding boxes";
            std::vector<std::string> subset;
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (category_of[i] == cat) subset.push_back(items[i]);
            }
            rec.turns.push_back({Role::human, std::move(prompt)});
            rec.turns.push_back({Role::assistant, join(subset, "; ")});
        }
    }
    return rec;
}

InstructionRecord compile_grounding(const ingest::SourceSample& sample,
                                    GroundingDirection direction, geom::BoundsMode bounds) {
    const auto* payload = std::get_if<ingest::GroundingPayload>(&sample.payload);
    if (!payload) throw CompileError(sample.id + ": payload is not grounding");
    if (payload->items.empty()) throw CompileError(sample.id + ": no grounding items");

    const Task task =
        direction == GroundingDirection::locate ? Task::grounding_locate : Task::region_caption;
    InstructionRecord rec{sample.id, sample.image_path, sample.modality, task, {}};
    for (const auto& item : payload->items) {
        if (item.expression.empty()) throw CompileError(sample.id + ": empty expression");
        std::string box_text;
        try {
            box_text = serialize_box_text(geom::normalize_box(item.box, sample.image_size, bounds));
        } catch (const geom::GeometryError& e) {
            throw CompileError(sample.id + ": " + e.what());
        }
        if (direction == GroundingDirection::locate) {
            rec.turns.push_back(
                {Role::human, item.expression + " " + std::string(prompts::kLocateSuffix)});
            rec.turns.push_back({Role::assistant, box_text});
        } else {
            rec.turns.push_back({Role::human, "Please provide a description of the target region " +
                                                  box_text + " in the RS image."});
            rec.turns.push_back({Role::assistant, item.expression});
        }
    }
    return rec;
}

// --- manifest ------------------------------------------------------------

namespace {

std::optional<SourceKind> source_kind_from_string(std::string_view s) {
    if (s == "classification") return SourceKind::classification;
    if (s == "caption") return SourceKind::caption;
    if (s == "vqa") return SourceKind::vqa;
    if (s == "detection") return SourceKind::detection;
    if (s == "grounding") return SourceKind::grounding;
    return std::nullopt;
}

BoxFormat box_format_from_json(const json& v) {
    const std::string s = v.get<std::string>();
    if (s == "hbb") return BoxFormat::hbb;
    if (s == "obb") return BoxFormat::obb;
    throw CompileError("manifest: unknown box format '" + s + "'");
}

GroundingDirection direction_from_json(const json& v) {
    const std::string s = v.get<std::string>();
    if (s == "locate") return GroundingDirection::locate;
    if (s == "describe") return GroundingDirection::describe;
    throw CompileError("manifest: unknown grounding direction '" + s + "'");
}

}  // namespace

CorpusManifest load_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw CompileError("cannot open manifest: " + file.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object())
        throw CompileError("manifest is not a JSON object: " + file.string());

    const auto base = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };

    CorpusManifest manifest;
    if (doc.contains("options")) {
        const auto& o = doc["options"];
        if (o.contains("strict")) manifest.options.strict = o["strict"].get<bool>();
        if (o.contains("shuffle_rounds"))
            manifest.options.shuffle_rounds = o["shuffle_rounds"].get<bool>();
        if (o.contains("seed")) manifest.options.seed = o["seed"].get<std::uint64_t>();
    }
    if (!doc.contains("entries") || !doc["entries"].is_array())
        throw CompileError("manifest: missing 'entries' array");

    for (const auto& e : doc["entries"]) {
        if (!e.is_object() || !e.contains("task") || !e.contains("name"))
            throw CompileError("manifest: entry needs 'task' and 'name'");
        ManifestEntry entry;
        const auto kind = source_kind_from_string(e["task"].get<std::string>());
        if (!kind) throw CompileError("manifest: unknown task '" + e["task"].get<std::string>() + "'");
        entry.kind = *kind;
        entry.name = e["name"].get<std::string>();
        if (e.contains("box_format")) entry.box_format = box_format_from_json(e["box_format"]);
        if (e.contains("referring")) entry.referring = e["referring"].get<bool>();
        if (e.contains("direction")) entry.direction = direction_from_json(e["direction"]);

        if (e.contains("format") && e["format"].get<std::string>() == "dota") {
            entry.dota = true;
            if (entry.kind != SourceKind::detection)
                throw CompileError("manifest: dota format is only valid for detection entries");
            if (!e.contains("files") || !e["files"].is_array())
                throw CompileError("manifest: dota entry needs a 'files' array");
            for (const auto& f : e["files"]) {
                for (const char* key : {"path", "id", "image", "modality", "width", "height"}) {
                    if (!f.contains(key))
                        throw CompileError(std::string("manifest: dota file needs '") + key + "'");
                }
                DotaFile df;
                df.path = resolve(f["path"].get<std::string>());
                df.meta.id = f["id"].get<std::string>();
                df.meta.image_path = f["image"].get<std::string>();
                const auto mod = ingest::modality_from_string(f["modality"].get<std::string>());
                if (!mod) throw CompileError("manifest: unknown modality in dota file entry");
                df.meta.modality = *mod;
                df.meta.image_size = {f["width"].get<int>(), f["height"].get<int>()};
                entry.dota_files.push_back(std::move(df));
            }
        } else {
            if (!e.contains("path")) throw CompileError("manifest: entry needs 'path'");
            entry.path = resolve(e["path"].get<std::string>());
            if (entry.kind == SourceKind::detection)
                throw CompileError(
                    "manifest: detection entries must use the dota format ('format':'dota')");
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

// --- corpus compilation ----------------------------------------------------

CompiledCorpus compile_corpus(const CorpusManifest& manifest) {
    const auto& opts = manifest.options;
    const geom::BoundsMode bounds =
        opts.strict ? geom::BoundsMode::strict : geom::BoundsMode::lenient;

    CompiledCorpus out;
    out.stats.seed = opts.seed;

    struct Compiled {
        InstructionRecord record;
        std::size_t entry_index;
        std::size_t sample_index;
        std::string source;
    };
    std::vector<Compiled> compiled;
    std::vector<ingest::SourceSample> all_samples;

    for (std::size_t ei = 0; ei < manifest.entries.size(); ++ei) {
        const auto& entry = manifest.entries[ei];
        ingest::ParseResult parsed;
        if (entry.dota) {
            for (const auto& f : entry.dota_files) {
                auto one = ingest::parse_dota_annotation(f.path, f.meta);
                std::move(one.samples.begin(), one.samples.end(),
                          std::back_inserter(parsed.samples));
                std::move(one.diagnostics.begin(), one.diagnostics.end(),
                          std::back_inserter(parsed.diagnostics));
            }
        } else {
            switch (entry.kind) {
                case SourceKind::classification:
                    parsed = ingest::parse_classification_manifest(entry.path);
                    break;
                case SourceKind::caption: parsed = ingest::parse_caption_file(entry.path); break;
                case SourceKind::vqa: parsed = ingest::parse_vqa_file(entry.path); break;
                case SourceKind::grounding:
                    parsed = ingest::parse_grounding_file(entry.path, bounds);
                    break;
                case SourceKind::detection: break;  // unreachable, manifest rejects it
            }
        }
        std::move(parsed.diagnostics.begin(), parsed.diagnostics.end(),
                  std::back_inserter(out.diagnostics));

        for (std::size_t si = 0; si < parsed.samples.size(); ++si) {
            const auto& sample = parsed.samples[si];
            try {
                InstructionRecord rec;
                switch (entry.kind) {
                    case SourceKind::classification: rec = compile_classification(sample); break;
                    case SourceKind::caption: rec = compile_caption(sample); break;
                    case SourceKind::vqa: rec = compile_vqa(sample); break;
                    case SourceKind::detection:
                        rec = compile_detection(sample, entry.box_format, entry.referring, bounds);
                        break;
                    case SourceKind::grounding:
                        rec = compile_grounding(sample, entry.direction, bounds);
                        break;
                }
                compiled.push_back({std::move(rec), ei, si, entry.name});
            } catch (const CompileError& e) {
                out.diagnostics.push_back(
                    {sample.id, ingest::Severity::error, e.what(), entry.path.string(), 0});
            }
        }
        std::move(parsed.samples.begin(), parsed.samples.end(), std::back_inserter(all_samples));
    }

    auto corpus_diags = ingest::validate_corpus(all_samples);
    std::move(corpus_diags.begin(), corpus_diags.end(), std::back_inserter(out.diagnostics));

    // Deterministic record order: task, then manifest entry, then file order.
    std::stable_sort(compiled.begin(), compiled.end(), [](const Compiled& a, const Compiled& b) {
        if (a.record.task != b.record.task)
            return static_cast<int>(a.record.task) < static_cast<int>(b.record.task);
        if (a.entry_index != b.entry_index) return a.entry_index < b.entry_index;
        return a.sample_index < b.sample_index;
    });

    if (opts.shuffle_rounds) {
        for (auto& item : compiled) {
            auto& turns = item.record.turns;
            const std::size_t rounds = turns.size() / 2;
            // Detection keeps the all-objects round first; it anchors the task.
            const bool pin_first = item.record.task == Task::detection_hbb ||
                                   item.record.task == Task::detection_obb;
            const std::size_t begin = pin_first ? 1 : 0;
            if (rounds - begin < 2) continue;
            std::vector<std::pair<Turn, Turn>> pairs;
            for (std::size_t r = begin; r < rounds; ++r)
                pairs.emplace_back(turns[2 * r], turns[2 * r + 1]);
            std::mt19937_64 rng(opts.seed ^ hash64(item.record.id));
            std::shuffle(pairs.begin(), pairs.end(), rng);
            for (std::size_t r = begin; r < rounds; ++r) {
                turns[2 * r] = pairs[r - begin].first;
                turns[2 * r + 1] = pairs[r - begin].second;
            }
        }
    }

    std::map<std::tuple<int, std::string, int>, std::size_t> counts;
    for (auto& item : compiled) {
        counts[{static_cast<int>(item.record.task), item.source,
                static_cast<int>(item.record.modality)}]++;
        out.stats.total_turn_pairs += item.record.round_count();
        out.records.push_back(std::move(item.record));
    }
    for (const auto& [key, count] : counts) {
        out.stats.rows.push_back({static_cast<Task>(std::get<0>(key)), std::get<1>(key),
                                  static_cast<ingest::Modality>(std::get<2>(key)), count});
    }
    out.stats.total_records = out.records.size();
    return out;
}

// --- record / stats serialization -------------------------------------------

std::string record_to_json_line(const InstructionRecord& record) {
    ordered_json obj;
    obj["id"] = record.id;
    obj["image"] = record.image_path;
    obj["modality"] = std::string(ingest::to_string(record.modality));
    obj["task"] = std::string(to_string(record.task));
    ordered_json conv = ordered_json::array();
    for (const auto& turn : record.turns) {
        conv.push_back({{"from", turn.role == Role::human ? "human" : "assistant"},
                        {"value", turn.text}});
    }
    obj["conversations"] = std::move(conv);
    return obj.dump();
}

InstructionRecord record_from_json_line(std::string_view line) {
    const json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object())
        throw CompileError("record line is not a JSON object");
    for (const char* key : {"id", "image", "modality", "task", "conversations"}) {
        if (!obj.contains(key)) throw CompileError(std::string("record missing '") + key + "'");
    }
    InstructionRecord rec;
    rec.id = obj["id"].get<std::string>();
    rec.image_path = obj["image"].get<std::string>();
    const auto mod = ingest::modality_from_string(obj["modality"].get<std::string>());
    if (!mod) throw CompileError("record has unknown modality");
    rec.modality = *mod;
    const auto task = task_from_string(obj["task"].get<std::string>());
    if (!task) throw CompileError("record has unknown task");
    rec.task = *task;
    if (!obj["conversations"].is_array() || obj["conversations"].empty() ||
        obj["conversations"].size() % 2 != 0)
        throw CompileError("record conversations must hold whole human/assistant rounds");
    for (std::size_t i = 0; i < obj["conversations"].size(); ++i) {
        const auto& t = obj["conversations"][i];
        if (!t.is_object() || !t.contains("from") || !t.contains("value"))
            throw CompileError("record turn missing from/value");
        const std::string from = t["from"].get<std::string>();
        const Role role = from == "human" ? Role::human : Role::assistant;
        if ((i % 2 == 0) != (role == Role::human))
            throw CompileError("record turns must alternate human/assistant");
        rec.turns.push_back({role, t["value"].get<std::string>()});
    }
    return rec;
}

void write_records_file(const std::filesystem::path& file,
                        std::span<const InstructionRecord> records) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw CompileError("cannot write records file: " + file.string());
    for (const auto& rec : records) out << record_to_json_line(rec) << '\n';
}

std::vector<InstructionRecord> read_records_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw CompileError("cannot open records file: " + file.string());
    std::vector<InstructionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (strings::trim(line).empty()) continue;
        records.push_back(record_from_json_line(line));
    }
    return records;
}

std::string stats_to_string(const CorpusStats& stats) {
    std::ostringstream out;
    out << "# seed: " << stats.seed << "\n";
    out << "# records: " << stats.total_records << "\n";
    out << "# turn_pairs: " << stats.total_turn_pairs << "\n";
    out << "Task\tData\tSize\tType\n";
    for (const auto& row : stats.rows) {
        out << to_string(row.task) << '\t' << row.source << '\t' << row.count << '\t'
            << ingest::display_name(row.modality) << '\n';
    }
    return out.str();
}

void write_stats_file(const std::filesystem::path& file, const CorpusStats& stats) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw CompileError("cannot write stats file: " + file.string());
    out << stats_to_string(stats);
}

}  // namespace rsit::compiler
