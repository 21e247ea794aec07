// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "rsit/compiler.hpp"
#include "support/temp_dir.hpp"

using namespace rsit;
using compiler::BoxFormat;
using compiler::GroundingDirection;
using compiler::Role;
using compiler::Task;
using ingest::Modality;
using ingest::SourceSample;

namespace {

SourceSample make_sample(std::string id, ingest::Payload payload, int w = 256, int h = 256) {
    SourceSample s;
    s.id = std::move(id);
    s.image_path = "images/" + s.id + ".png";
    s.modality = Modality::optical;
    s.image_size = {w, h};
    s.payload = std::move(payload);
    return s;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

const std::filesystem::path kFixtures = std::filesystem::path(RSIT_FIXTURE_DIR);

}  // namespace

TEST_CASE("compile_classification emits the category template") {
    auto s = make_sample(
        "c1", ingest::ClassificationPayload{"airport", {"airport", "beach"}});
    const auto rec = compiler::compile_classification(s);
    CHECK(rec.task == Task::classification);
    REQUIRE(rec.turns.size() == 2);
    CHECK(rec.turns[0].text ==
          "What is the category of this RS image? Answering the question using a single word or "
          "phrase. Reference categories include airport,beach");
    CHECK(rec.turns[1].text == "airport");

    auto single = make_sample("c2", ingest::ClassificationPayload{"beach", {"beach"}});
    const auto rec2 = compiler::compile_classification(single);
    CHECK(rec2.turns[0].text.find("include beach") != std::string::npos);

    auto missing = make_sample("c3", ingest::ClassificationPayload{"harbor", {"airport"}});
    CHECK_THROWS_AS(compiler::compile_classification(missing), compiler::CompileError);
}

TEST_CASE("compile_caption: one round per unique caption, first occurrence kept") {
    auto five = make_sample("k1", ingest::CaptionsPayload{{"a", "b", "c", "d", "e"}});
    CHECK(compiler::compile_caption(five).round_count() == 5);

    auto dup = make_sample("k2", ingest::CaptionsPayload{{"a", "a", "b"}});
    const auto rec = compiler::compile_caption(dup);
    REQUIRE(rec.round_count() == 2);
    CHECK(rec.turns[1].text == "a");
    CHECK(rec.turns[3].text == "b");
    CHECK(rec.turns[0].text ==
          "Please provide a one-sentence caption for the provided RS image in detail.");

    auto one = make_sample("k3", ingest::CaptionsPayload{{"only"}});
    CHECK(compiler::compile_caption(one).round_count() == 1);
}

TEST_CASE("compile_vqa: suffix appended exactly once, answers verbatim") {
    auto s = make_sample(
        "v1", ingest::VqaPayload{{{"How many planes?", "4"},
                                  {"Is there a runway? Answering the question using a single "
                                   "word or phrase.",
                                   "yes"},
                                  {"What season?", "summer"}}});
    const auto rec = compiler::compile_vqa(s);
    REQUIRE(rec.round_count() == 3);
    const std::string suffix = "Answering the question using a single word or phrase.";
    for (std::size_t r = 0; r < 3; ++r) {
        const auto& q = rec.turns[2 * r].text;
        CHECK(q.size() >= suffix.size());
        CHECK(q.substr(q.size() - suffix.size()) == suffix);
        // exactly once
        CHECK(q.find(suffix) == q.rfind(suffix));
    }
    CHECK(rec.turns[1].text == "4");
    CHECK(rec.turns[0].text == "How many planes? " + suffix);
    CHECK(rec.turns[2].text ==
          "Is there a runway? Answering the question using a single word or phrase.");
}

TEST_CASE("compile_detection: box strings, referring rounds, format errors") {
    const geom::OrientedBox quad{{geom::Point{1, 1}, geom::Point{3, 1}, geom::Point{3, 3},
                                  geom::Point{1, 3}}};
    ingest::DetectionPayload det;
    det.instances.push_back({"plane", quad, false});
    auto s = make_sample("d1", det, 4, 4);

    const auto rec = compiler::compile_detection(s, BoxFormat::obb, false);
    CHECK(rec.task == Task::detection_obb);
    REQUIRE(rec.turns.size() == 2);
    CHECK(rec.turns[0].text ==
          "Detect all objects shown in the RS image and describe using oriented bounding boxes");
    CHECK(rec.turns[1].text ==
          "plane [0.2500,0.2500,0.7500,0.2500,0.7500,0.7500,0.2500,0.7500]");

    // 2 planes + 1 ship, referring -> base round plus one round per category.
    ingest::DetectionPayload multi;
    multi.instances.push_back({"plane", geom::OrientedBox{{geom::Point{0, 0}, geom::Point{1, 0},
                                                           geom::Point{1, 1}, geom::Point{0, 1}}},
                               false});
    multi.instances.push_back({"ship", geom::OrientedBox{{geom::Point{2, 2}, geom::Point{3, 2},
                                                          geom::Point{3, 3}, geom::Point{2, 3}}},
                               false});
    multi.instances.push_back({"plane", geom::OrientedBox{{geom::Point{0, 2}, geom::Point{1, 2},
                                                           geom::Point{1, 3}, geom::Point{0, 3}}},
                               false});
    auto ms = make_sample("d2", multi, 4, 4);
    const auto mrec = compiler::compile_detection(ms, BoxFormat::hbb, true);
    CHECK(mrec.task == Task::detection_hbb);
    REQUIRE(mrec.round_count() == 3);  // all-objects + plane + ship
    CHECK(mrec.turns[2].text ==
          "Detect all the plane shown in the RS image and describe using horizontal bounding "
          "boxes");
    CHECK(mrec.turns[4].text ==
          "Detect all the ship shown in the RS image and describe using horizontal bounding "
          "boxes");
    // plane round lists exactly the two plane boxes, source order
    CHECK(mrec.turns[3].text ==
          "plane [0.0000,0.0000,0.2500,0.2500]; plane [0.0000,0.5000,0.2500,0.7500]");
    CHECK(mrec.turns[5].text == "ship [0.5000,0.5000,0.7500,0.7500]");

    // HBB format on an OBB source equals hbb_from_obb output.
    ingest::DetectionPayload rot;
    rot.instances.push_back({"plane", geom::OrientedBox{{geom::Point{1, 0}, geom::Point{2, 1},
                                                         geom::Point{1, 2}, geom::Point{0, 1}}},
                             false});
    auto rs = make_sample("d3", rot, 4, 4);
    const auto rrec = compiler::compile_detection(rs, BoxFormat::hbb, false);
    CHECK(rrec.turns[1].text == "plane [0.0000,0.0000,0.5000,0.5000]");

    // Oriented output on a horizontal-only payload is an error.
    ingest::DetectionPayload hbb_only;
    hbb_only.instances.push_back({"car", geom::make_hbb(0, 0, 1, 1), false});
    auto hs = make_sample("d4", hbb_only, 4, 4);
    CHECK_THROWS_AS(compiler::compile_detection(hs, BoxFormat::obb, false),
                    compiler::CompileError);
    CHECK_NOTHROW(compiler::compile_detection(hs, BoxFormat::hbb, false));

    ingest::DetectionPayload empty;
    auto es = make_sample("d5", empty, 4, 4);
    CHECK_THROWS_AS(compiler::compile_detection(es, BoxFormat::hbb, false),
                    compiler::CompileError);
}

TEST_CASE("compile_grounding: locate and describe directions") {
    ingest::GroundingPayload g;
    g.items.push_back({"the white storage tank", geom::make_hbb(0, 0, 128, 128)});
    auto s = make_sample("g1", g);

    const auto locate = compiler::compile_grounding(s, GroundingDirection::locate);
    CHECK(locate.task == Task::grounding_locate);
    REQUIRE(locate.turns.size() == 2);
    CHECK(locate.turns[0].text ==
          "the white storage tank Please provide the coordinates of the described target in the "
          "RS image.");
    CHECK(locate.turns[1].text == "[0.0000,0.0000,0.5000,0.5000]");

    const auto describe = compiler::compile_grounding(s, GroundingDirection::describe);
    CHECK(describe.task == Task::region_caption);
    CHECK(describe.turns[0].text.find("[0.0000,0.0000,0.5000,0.5000]") != std::string::npos);
    CHECK(describe.turns[1].text == "the white storage tank");

    ingest::GroundingPayload two;
    two.items.push_back({"a", geom::make_hbb(0, 0, 10, 10)});
    two.items.push_back({"b", geom::make_hbb(20, 20, 40, 40)});
    auto s2 = make_sample("g2", two);
    CHECK(compiler::compile_grounding(s2, GroundingDirection::locate).round_count() == 2);
}

TEST_CASE("box text: serialize, parse, errors") {
    geom::NormalizedBox b;
    b.kind = geom::BoxKind::hbb;
    b.values = {0.0, 0.0, 0.5, 0.5};
    CHECK(compiler::serialize_box_text(b) == "[0.0000,0.0000,0.5000,0.5000]");

    CHECK(compiler::parse_box_text("  [0.0000,0.0000,0.5000,0.5000] ") == b);
    CHECK_FALSE(compiler::try_parse_box_text("[1.2,0,0,0]").has_value());    // out of range
    CHECK_FALSE(compiler::try_parse_box_text("[0.1,0.2,0.3]").has_value()); // wrong count
    CHECK_FALSE(compiler::try_parse_box_text("[0.1,0.2,x,0.4]").has_value());
    CHECK_FALSE(compiler::try_parse_box_text("0.1,0.2,0.3,0.4").has_value());
    CHECK_THROWS_AS(compiler::parse_box_text("nonsense"), compiler::CompileError);
}

TEST_CASE("box text round-trips on random normalized boxes") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        geom::NormalizedBox b;
        b.kind = (i % 2) ? geom::BoxKind::hbb : geom::BoxKind::obb;
        for (std::size_t k = 0; k < b.count(); ++k) b.values[k] = geom::quantize_coord(d(rng));
        const auto text = compiler::serialize_box_text(b);
        const auto parsed = compiler::parse_box_text(text);
        CHECK(parsed == b);
    }
}

TEST_CASE("record json line round-trips") {
    compiler::InstructionRecord rec;
    rec.id = "r1";
    rec.image_path = "images/r1.png";
    rec.modality = Modality::sar;
    rec.task = Task::vqa;
    rec.turns = {{Role::human, "q1"}, {Role::assistant, "a1"},
                 {Role::human, "q2"}, {Role::assistant, "a2"}};
    const auto line = compiler::record_to_json_line(rec);
    CHECK(compiler::record_from_json_line(line) == rec);

    CHECK_THROWS_AS(compiler::record_from_json_line("{\"id\":\"x\"}"), compiler::CompileError);
}

TEST_CASE("compile_corpus on the fixture manifest") {
    const auto manifest = compiler::load_manifest(kFixtures / "corpus/manifest.json");
    const auto corpus = compiler::compile_corpus(manifest);

    CHECK_FALSE(corpus.has_errors());
    CHECK(corpus.records.size() == 61);
    CHECK(corpus.stats.total_records == 61);

    // Records are ordered by task enum, then entry order.
    for (std::size_t i = 1; i < corpus.records.size(); ++i) {
        CHECK(static_cast<int>(corpus.records[i - 1].task) <=
              static_cast<int>(corpus.records[i].task));
    }

    // Stats cover all three modalities and sum to the record count.
    std::size_t sum = 0;
    bool sar = false, infrared = false, optical = false;
    for (const auto& row : corpus.stats.rows) {
        sum += row.count;
        optical |= row.modality == Modality::optical;
        sar |= row.modality == Modality::sar;
        infrared |= row.modality == Modality::infrared;
    }
    CHECK(sum == corpus.records.size());
    CHECK(optical);
    CHECK(sar);
    CHECK(infrared);

    // Every assistant box string in detection/grounding rounds parses back.
    for (const auto& rec : corpus.records) {
        if (rec.task == Task::grounding_locate) {
            for (std::size_t r = 0; r < rec.round_count(); ++r) {
                CHECK(compiler::try_parse_box_text(rec.turns[2 * r + 1].text).has_value());
            }
        }
    }
}

TEST_CASE("compile_corpus determinism: identical runs, identical bytes") {
    const auto manifest = compiler::load_manifest(kFixtures / "corpus/manifest.json");
    testing::TempDir tmp;

    for (const std::string tag : {"a", "b"}) {
        const auto corpus = compiler::compile_corpus(manifest);
        compiler::write_records_file(tmp.path() / ("rec_" + tag + ".jsonl"), corpus.records);
        compiler::write_stats_file(tmp.path() / ("stats_" + tag + ".tsv"), corpus.stats);
    }
    CHECK(read_file(tmp.path() / "rec_a.jsonl") == read_file(tmp.path() / "rec_b.jsonl"));
    CHECK(read_file(tmp.path() / "stats_a.tsv") == read_file(tmp.path() / "stats_b.tsv"));
}

TEST_CASE("compile_corpus: caption+detection subset yields 15 records") {
    testing::TempDir tmp;
    const std::string manifest_json = R"({
      "options": {"strict": true},
      "entries": [
        {"task":"caption","name":"demo-captions","path":")" +
                                      (kFixtures / "corpus/captions.jsonl").string() + R"("},
        {"task":"detection","name":"demo-aerial","format":"dota","box_format":"obb",
         "files":[
          {"path":")" + (kFixtures / "corpus/dota/P0001.txt").string() +
                                      R"(","id":"p1","image":"i1","modality":"optical","width":1024,"height":1024},
          {"path":")" + (kFixtures / "corpus/dota/P0002.txt").string() +
                                      R"(","id":"p2","image":"i2","modality":"optical","width":1024,"height":1024},
          {"path":")" + (kFixtures / "corpus/dota/P0003.txt").string() +
                                      R"(","id":"p3","image":"i3","modality":"optical","width":1024,"height":1024},
          {"path":")" + (kFixtures / "corpus/dota/P0004.txt").string() +
                                      R"(","id":"p4","image":"i4","modality":"optical","width":1024,"height":1024},
          {"path":")" + (kFixtures / "corpus/dota/P0005.txt").string() +
                                      R"(","id":"p5","image":"i5","modality":"optical","width":1024,"height":1024}
        ]}
      ]})";
    const auto mpath = tmp.write("m.json", manifest_json);
    const auto corpus = compiler::compile_corpus(compiler::load_manifest(mpath));
    CHECK_FALSE(corpus.has_errors());
    CHECK(corpus.records.size() == 15);
    CHECK(corpus.stats.rows.size() == 2);
}

TEST_CASE("shuffle_rounds only reorders rounds and only when enabled") {
    const auto manifest = compiler::load_manifest(kFixtures / "corpus/manifest.json");
    auto shuffled_manifest = manifest;
    shuffled_manifest.options.shuffle_rounds = true;
    shuffled_manifest.options.seed = 1234;

    const auto plain = compiler::compile_corpus(manifest);
    const auto shuffled = compiler::compile_corpus(shuffled_manifest);
    REQUIRE(plain.records.size() == shuffled.records.size());

    bool any_reordered = false;
    for (std::size_t i = 0; i < plain.records.size(); ++i) {
        const auto& a = plain.records[i];
        const auto& b = shuffled.records[i];
        CHECK(a.id == b.id);
        REQUIRE(a.turns.size() == b.turns.size());
        // Same multiset of rounds.
        auto rounds = [](const compiler::InstructionRecord& r) {
            std::vector<std::pair<std::string, std::string>> out;
            for (std::size_t k = 0; k < r.round_count(); ++k)
                out.emplace_back(r.turns[2 * k].text, r.turns[2 * k + 1].text);
            std::sort(out.begin(), out.end());
            return out;
        };
        CHECK(rounds(a) == rounds(b));
        if (a.turns != b.turns) any_reordered = true;
    }
    CHECK(any_reordered);

    // Same seed, same bytes.
    const auto again = compiler::compile_corpus(shuffled_manifest);
    CHECK(again.records == shuffled.records);
}

TEST_CASE("try_parse_box_text never accepts garbage") {
    std::mt19937_64 rng(113);
    const std::string alphabet = "0123456789.,[]- eE+x";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 40);
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        const int n = len(rng);
        for (int k = 0; k < n; ++k) s += alphabet[pick(rng)];
        const auto parsed = compiler::try_parse_box_text(s);
        if (parsed) {
            // Anything accepted must itself round-trip through the format.
            const auto again = compiler::try_parse_box_text(compiler::serialize_box_text(*parsed));
            REQUIRE(again.has_value());
            CHECK(*again == *parsed);
        }
    }
}
