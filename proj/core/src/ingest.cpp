// SPDX-License-Identifier: Apache-2.0

#include "rsit/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "rsit/strings.hpp"

namespace rsit::ingest {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::ifstream open_or_throw(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IngestError("cannot open file: " + file.string());
    return in;
}

void add(std::vector<Diagnostic>& diags, std::string id, Severity sev, std::string msg,
         const std::filesystem::path& file, int line) {
    diags.push_back({std::move(id), sev, std::move(msg), file.string(), line});
}

std::optional<double> parse_double(std::string_view tok) {
    double v = 0.0;
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<int> parse_int(std::string_view tok) {
    int v = 0;
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

// Shared header fields of the canonical line formats. Returns false and
// records a diagnostic when any of them is missing or malformed.
bool read_common_fields(const json& obj, SourceSample& s, std::vector<Diagnostic>& diags,
                        const std::filesystem::path& file, int line) {
    if (!obj.is_object()) {
        add(diags, "", Severity::error, "line is not a JSON object", file, line);
        return false;
    }
    for (const char* key : {"id", "image", "modality", "width", "height"}) {
        if (!obj.contains(key)) {
            add(diags, "", Severity::error, std::string("missing field '") + key + "'", file,
                line);
            return false;
        }
    }
    if (!obj["id"].is_string() || !obj["image"].is_string() || !obj["modality"].is_string() ||
        !obj["width"].is_number_integer() || !obj["height"].is_number_integer()) {
        add(diags, "", Severity::error, "field has wrong type", file, line);
        return false;
    }
    s.id = obj["id"].get<std::string>();
    s.image_path = obj["image"].get<std::string>();
    const auto mod = modality_from_string(obj["modality"].get<std::string>());
    if (!mod) {
        add(diags, s.id, Severity::error,
            "unknown modality '" + obj["modality"].get<std::string>() + "'", file, line);
        return false;
    }
    s.modality = *mod;
    const int w = obj["width"].get<int>();
    const int h = obj["height"].get<int>();
    if (w < 1 || h < 1) {
        add(diags, s.id, Severity::error, "non-positive image size", file, line);
        return false;
    }
    s.image_size = {w, h};
    return true;
}

ordered_json common_fields_json(const SourceSample& s) {
    ordered_json obj;
    obj["id"] = s.id;
    obj["image"] = s.image_path;
    obj["modality"] = std::string(to_string(s.modality));
    obj["width"] = s.image_size.width;
    obj["height"] = s.image_size.height;
    return obj;
}

void write_lines(const std::filesystem::path& file, const std::vector<std::string>& lines) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IngestError("cannot write file: " + file.string());
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace

std::optional<Modality> modality_from_string(std::string_view s) {
    if (s == "optical") return Modality::optical;
    if (s == "sar") return Modality::sar;
    if (s == "infrared") return Modality::infrared;
    return std::nullopt;
}

std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::optical: return "optical";
        case Modality::sar: return "sar";
        case Modality::infrared: return "infrared";
    }
    return "optical";
}

std::string_view display_name(Modality m) {
    return m == Modality::sar ? "SAR" : to_string(m);
}

ParseResult parse_classification_manifest(const std::filesystem::path& file) {
    ParseResult result;
    std::ifstream in = open_or_throw(file);

    std::string line;
    if (!std::getline(in, line)) return result;  // empty file: nothing to report

    static const std::vector<std::string> kColumns = {"id",    "image_path", "modality",
                                                      "width", "height",     "category"};
    const auto header = strings::split(strings::trim(line), ',');
    for (const auto& col : kColumns) {
        if (std::find(header.begin(), header.end(), col) == header.end()) {
            add(result.diagnostics, "", Severity::error, "missing column '" + col + "'", file, 1);
            return result;
        }
    }
    std::vector<std::size_t> index;
    for (const auto& col : kColumns)
        index.push_back(std::find(header.begin(), header.end(), col) - header.begin());

    struct Row {
        SourceSample sample;
        std::string category;
    };
    std::vector<Row> rows;
    std::set<std::string> categories;

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (strings::trim(line).empty()) continue;
        const auto fields = strings::split(line, ',');
        if (fields.size() != header.size()) {
            add(result.diagnostics, "", Severity::error, "wrong field count", file, lineno);
            continue;
        }
        Row row;
        row.sample.id = strings::trim(fields[index[0]]);
        row.sample.image_path = strings::trim(fields[index[1]]);
        const std::string mod_text = strings::trim(fields[index[2]]);
        const auto mod = modality_from_string(mod_text);
        if (!mod) {
            add(result.diagnostics, row.sample.id, Severity::error,
                "unknown modality '" + mod_text + "'", file, lineno);
            continue;
        }
        row.sample.modality = *mod;
        const auto w = parse_int(strings::trim(fields[index[3]]));
        const auto h = parse_int(strings::trim(fields[index[4]]));
        if (!w || !h || *w < 1 || *h < 1) {
            add(result.diagnostics, row.sample.id, Severity::error, "bad image size", file,
                lineno);
            continue;
        }
        row.sample.image_size = {*w, *h};
        row.category = strings::trim(fields[index[5]]);
        if (row.category.empty()) {
            add(result.diagnostics, row.sample.id, Severity::error, "empty category", file,
                lineno);
            continue;
        }
        categories.insert(row.category);
        rows.push_back(std::move(row));
    }

    const std::vector<std::string> reference(categories.begin(), categories.end());
    for (auto& row : rows) {
        row.sample.payload = ClassificationPayload{std::move(row.category), reference};
        result.samples.push_back(std::move(row.sample));
    }
    return result;
}

namespace {

// Common driver for the line-delimited JSON task files; `fill` parses the
// task-specific portion and returns false to drop the sample.
template <typename Fill>
ParseResult parse_jsonl(const std::filesystem::path& file, Fill&& fill) {
    ParseResult result;
    std::ifstream in = open_or_throw(file);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (strings::trim(line).empty()) continue;
        const json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded()) {
            add(result.diagnostics, "", Severity::error, "malformed JSON", file, lineno);
            continue;
        }
        SourceSample s;
        if (!read_common_fields(obj, s, result.diagnostics, file, lineno)) continue;
        if (fill(obj, s, result.diagnostics, lineno)) result.samples.push_back(std::move(s));
    }
    return result;
}

}  // namespace

ParseResult parse_caption_file(const std::filesystem::path& file) {
    return parse_jsonl(file, [&](const json& obj, SourceSample& s,
                                 std::vector<Diagnostic>& diags, int lineno) {
        if (!obj.contains("captions") || !obj["captions"].is_array()) {
            add(diags, s.id, Severity::error, "missing 'captions' array", file, lineno);
            return false;
        }
        CaptionsPayload payload;
        for (const auto& c : obj["captions"]) {
            if (!c.is_string()) {
                add(diags, s.id, Severity::error, "caption is not a string", file, lineno);
                return false;
            }
            const std::string text = strings::trim(c.get<std::string>());
            if (text.empty()) {
                add(diags, s.id, Severity::warning, "empty caption dropped", file, lineno);
                continue;
            }
            payload.captions.push_back(text);
        }
        if (payload.captions.empty()) {
            add(diags, s.id, Severity::error, "no usable captions", file, lineno);
            return false;
        }
        s.payload = std::move(payload);
        return true;
    });
}

ParseResult parse_vqa_file(const std::filesystem::path& file) {
    return parse_jsonl(file, [&](const json& obj, SourceSample& s,
                                 std::vector<Diagnostic>& diags, int lineno) {
        if (!obj.contains("qa") || !obj["qa"].is_array()) {
            add(diags, s.id, Severity::error, "missing 'qa' array", file, lineno);
            return false;
        }
        VqaPayload payload;
        for (const auto& q : obj["qa"]) {
            if (!q.is_object() || !q.contains("question") || !q.contains("answer") ||
                !q["question"].is_string() || !q["answer"].is_string()) {
                add(diags, s.id, Severity::error, "malformed qa pair", file, lineno);
                return false;
            }
            QaPair pair{strings::trim(q["question"].get<std::string>()),
                        strings::trim(q["answer"].get<std::string>())};
            if (pair.question.empty()) {
                add(diags, s.id, Severity::warning, "empty question dropped", file, lineno);
                continue;
            }
            payload.pairs.push_back(std::move(pair));
        }
        if (payload.pairs.empty()) {
            add(diags, s.id, Severity::error, "no usable qa pairs", file, lineno);
            return false;
        }
        s.payload = std::move(payload);
        return true;
    });
}

ParseResult parse_grounding_file(const std::filesystem::path& file, geom::BoundsMode mode) {
    return parse_jsonl(file, [&](const json& obj, SourceSample& s,
                                 std::vector<Diagnostic>& diags, int lineno) {
        if (!obj.contains("groundings") || !obj["groundings"].is_array()) {
            add(diags, s.id, Severity::error, "missing 'groundings' array", file, lineno);
            return false;
        }
        GroundingPayload payload;
        for (const auto& g : obj["groundings"]) {
            if (!g.is_object() || !g.contains("expression") || !g.contains("box") ||
                !g["expression"].is_string() || !g["box"].is_array() || g["box"].size() != 4) {
                add(diags, s.id, Severity::error, "malformed grounding entry", file, lineno);
                return false;
            }
            const std::string expr = strings::trim(g["expression"].get<std::string>());
            if (expr.empty()) {
                add(diags, s.id, Severity::warning, "empty expression dropped", file, lineno);
                continue;
            }
            double v[4];
            bool ok = true;
            for (int i = 0; i < 4; ++i) {
                if (!g["box"][i].is_number()) ok = false;
                else v[i] = g["box"][i].get<double>();
            }
            if (!ok) {
                add(diags, s.id, Severity::error, "non-numeric box coordinate", file, lineno);
                continue;
            }
            geom::HorizontalBox box;
            try {
                box = geom::make_hbb(v[0], v[1], v[2], v[3]);
            } catch (const geom::GeometryError& e) {
                add(diags, s.id, Severity::error, e.what(), file, lineno);
                continue;
            }
            const bool in_bounds = box.xmax <= s.image_size.width &&
                                   box.ymax <= s.image_size.height;
            if (!in_bounds && mode == geom::BoundsMode::strict) {
                add(diags, s.id, Severity::error, "box exceeds image bounds", file, lineno);
                continue;
            }
            payload.items.push_back({expr, box});
        }
        if (payload.items.empty()) {
            add(diags, s.id, Severity::error, "no usable groundings", file, lineno);
            return false;
        }
        s.payload = std::move(payload);
        return true;
    });
}

ParseResult parse_dota_annotation(const std::filesystem::path& file, const DotaImageMeta& meta) {
    ParseResult result;
    std::ifstream in = open_or_throw(file);

    DetectionPayload payload;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string trimmed = strings::trim(line);
        if (trimmed.empty()) continue;
        if (strings::starts_with(trimmed, "imagesource:") || strings::starts_with(trimmed, "gsd:"))
            continue;

        const auto tokens = strings::split_ws(trimmed);
        if (tokens.size() != 10) {
            add(result.diagnostics, meta.id, Severity::error,
                "expected 10 tokens, got " + std::to_string(tokens.size()), file, lineno);
            continue;
        }
        std::array<geom::Point, 4> pts{};
        bool numeric = true;
        for (int i = 0; i < 4 && numeric; ++i) {
            const auto x = parse_double(tokens[2 * i]);
            const auto y = parse_double(tokens[2 * i + 1]);
            if (!x || !y) numeric = false;
            else pts[i] = {*x, *y};
        }
        if (!numeric) {
            add(result.diagnostics, meta.id, Severity::error, "non-numeric coordinate", file,
                lineno);
            continue;
        }
        const std::string category = tokens[8];
        const auto difficult = parse_int(tokens[9]);
        if (!difficult || (*difficult != 0 && *difficult != 1)) {
            add(result.diagnostics, meta.id, Severity::error, "bad difficult flag", file, lineno);
            continue;
        }
        try {
            DetectionInstance inst{category, geom::canonicalize_obb(pts), *difficult == 1};
            payload.instances.push_back(std::move(inst));
        } catch (const geom::GeometryError& e) {
            add(result.diagnostics, meta.id, Severity::error, e.what(), file, lineno);
        }
    }

    if (payload.instances.empty()) {
        add(result.diagnostics, meta.id, Severity::error, "no usable instances", file, 0);
        return result;
    }

    SourceSample s;
    s.id = meta.id;
    s.image_path = meta.image_path;
    s.modality = meta.modality;
    s.image_size = meta.image_size;
    s.payload = std::move(payload);
    result.samples.push_back(std::move(s));
    return result;
}

std::vector<Diagnostic> validate_corpus(std::span<const SourceSample> samples) {
    std::vector<Diagnostic> diags;

    std::unordered_map<std::string, int> id_count;
    for (const auto& s : samples) ++id_count[s.id];
    std::unordered_set<std::string> reported;
    for (const auto& s : samples) {
        if (id_count[s.id] > 1 && reported.insert(s.id).second) {
            diags.push_back({s.id, Severity::error,
                             "duplicate id (" + std::to_string(id_count[s.id]) + " samples)",
                             "", 0});
        }
    }

    for (const auto& s : samples) {
        if (const auto* cap = std::get_if<CaptionsPayload>(&s.payload)) {
            if (cap->captions.empty())
                diags.push_back({s.id, Severity::error, "empty payload", "", 0});
            std::unordered_set<std::string> seen;
            bool dup = false;
            for (const auto& c : cap->captions) {
                if (!seen.insert(c).second) dup = true;
            }
            if (dup) diags.push_back({s.id, Severity::warning, "duplicate caption", "", 0});
        } else if (const auto* det = std::get_if<DetectionPayload>(&s.payload)) {
            if (det->instances.empty())
                diags.push_back({s.id, Severity::error, "empty payload", "", 0});
            for (std::size_t i = 0; i < det->instances.size(); ++i) {
                const auto hbb = std::visit(
                    [](const auto& b) {
                        if constexpr (std::is_same_v<std::decay_t<decltype(b)>,
                                                     geom::OrientedBox>) {
                            return geom::hbb_from_obb(b);
                        } else {
                            return b;
                        }
                    },
                    det->instances[i].box);
                if (hbb.xmax > s.image_size.width || hbb.ymax > s.image_size.height) {
                    diags.push_back({s.id, Severity::error,
                                     "instance " + std::to_string(i) + " outside image bounds",
                                     "", 0});
                }
            }
        } else if (const auto* g = std::get_if<GroundingPayload>(&s.payload)) {
            if (g->items.empty())
                diags.push_back({s.id, Severity::error, "empty payload", "", 0});
            for (std::size_t i = 0; i < g->items.size(); ++i) {
                const auto& b = g->items[i].box;
                if (b.xmax > s.image_size.width || b.ymax > s.image_size.height) {
                    diags.push_back({s.id, Severity::error,
                                     "grounding " + std::to_string(i) + " outside image bounds",
                                     "", 0});
                }
            }
        } else if (const auto* v = std::get_if<VqaPayload>(&s.payload)) {
            if (v->pairs.empty())
                diags.push_back({s.id, Severity::error, "empty payload", "", 0});
        } else if (const auto* c = std::get_if<ClassificationPayload>(&s.payload)) {
            if (c->category.empty())
                diags.push_back({s.id, Severity::error, "empty payload", "", 0});
        }
    }
    return diags;
}

void write_caption_file(const std::filesystem::path& file,
                        std::span<const SourceSample> samples) {
    std::vector<std::string> lines;
    for (const auto& s : samples) {
        const auto* cap = std::get_if<CaptionsPayload>(&s.payload);
        if (!cap) throw IngestError("write_caption_file: sample " + s.id + " is not a caption");
        ordered_json obj = common_fields_json(s);
        obj["captions"] = cap->captions;
        lines.push_back(obj.dump());
    }
    write_lines(file, lines);
}

void write_vqa_file(const std::filesystem::path& file, std::span<const SourceSample> samples) {
    std::vector<std::string> lines;
    for (const auto& s : samples) {
        const auto* vqa = std::get_if<VqaPayload>(&s.payload);
        if (!vqa) throw IngestError("write_vqa_file: sample " + s.id + " is not vqa");
        ordered_json obj = common_fields_json(s);
        ordered_json qa = ordered_json::array();
        for (const auto& p : vqa->pairs) {
            qa.push_back({{"question", p.question}, {"answer", p.answer}});
        }
        obj["qa"] = std::move(qa);
        lines.push_back(obj.dump());
    }
    write_lines(file, lines);
}

void write_grounding_file(const std::filesystem::path& file,
                          std::span<const SourceSample> samples) {
    std::vector<std::string> lines;
    for (const auto& s : samples) {
        const auto* g = std::get_if<GroundingPayload>(&s.payload);
        if (!g) throw IngestError("write_grounding_file: sample " + s.id + " is not grounding");
        ordered_json obj = common_fields_json(s);
        ordered_json arr = ordered_json::array();
        for (const auto& item : g->items) {
            arr.push_back({{"expression", item.expression},
                           {"box", {item.box.xmin, item.box.ymin, item.box.xmax, item.box.ymax}}});
        }
        obj["groundings"] = std::move(arr);
        lines.push_back(obj.dump());
    }
    write_lines(file, lines);
}

std::string format_diagnostic(const Diagnostic& d) {
    std::ostringstream out;
    out << (d.severity == Severity::error ? "error" : "warning");
    if (!d.file.empty()) {
        out << " " << d.file;
        if (d.line > 0) out << ":" << d.line;
    }
    if (!d.sample_id.empty()) out << " [" << d.sample_id << "]";
    out << ": " << d.message;
    return out.str();
}

}  // namespace rsit::ingest
