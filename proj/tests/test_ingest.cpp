// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "rsit/ingest.hpp"
#include "support/temp_dir.hpp"

using namespace rsit;
using ingest::Modality;
using ingest::Severity;

namespace {

int error_count(const std::vector<ingest::Diagnostic>& diags) {
    int n = 0;
    for (const auto& d : diags)
        if (d.severity == Severity::error) ++n;
    return n;
}

}  // namespace

TEST_CASE("classification manifest: rows, reference list, bad rows") {
    testing::TempDir tmp;
    const auto file = tmp.write("cls.csv",
                                "id,image_path,modality,width,height,category\n"
                                "c1,img/1.png,optical,256,256,beach\n"
                                "c2,img/2.png,optical,256,256,airport\n"
                                "c3,img/3.png,sar,512,512,beach\n");
    const auto res = ingest::parse_classification_manifest(file);
    REQUIRE(res.samples.size() == 3);
    CHECK(res.diagnostics.empty());
    const auto& p = std::get<ingest::ClassificationPayload>(res.samples[0].payload);
    CHECK(p.category == "beach");
    CHECK(p.reference_categories == std::vector<std::string>{"airport", "beach"});
    CHECK(res.samples[2].modality == Modality::sar);
}

TEST_CASE("classification manifest: empty file, unknown modality, missing column") {
    testing::TempDir tmp;

    const auto empty = tmp.write("empty.csv", "");
    const auto res_empty = ingest::parse_classification_manifest(empty);
    CHECK(res_empty.samples.empty());
    CHECK(res_empty.diagnostics.empty());

    const auto radar = tmp.write("radar.csv",
                                 "id,image_path,modality,width,height,category\n"
                                 "c1,img/1.png,radar,256,256,beach\n");
    const auto res_radar = ingest::parse_classification_manifest(radar);
    CHECK(res_radar.samples.empty());
    REQUIRE(res_radar.diagnostics.size() == 1);
    CHECK(res_radar.diagnostics[0].severity == Severity::error);
    CHECK(res_radar.diagnostics[0].message.find("unknown modality") != std::string::npos);

    const auto missing = tmp.write("missing.csv",
                                   "id,image_path,width,height,category\n"
                                   "c1,img/1.png,256,256,beach\n");
    const auto res_missing = ingest::parse_classification_manifest(missing);
    CHECK(res_missing.samples.empty());
    CHECK(error_count(res_missing.diagnostics) == 1);

    const auto empty_cat = tmp.write("ecat.csv",
                                     "id,image_path,modality,width,height,category\n"
                                     "c1,img/1.png,optical,256,256,\n");
    const auto res_ecat = ingest::parse_classification_manifest(empty_cat);
    CHECK(res_ecat.samples.empty());
    CHECK(error_count(res_ecat.diagnostics) == 1);
}

TEST_CASE("caption file: counts, empty captions dropped with warning") {
    testing::TempDir tmp;
    const auto file = tmp.write(
        "cap.jsonl",
        R"({"id":"a","image":"i/a.png","modality":"optical","width":100,"height":100,"captions":["one","two","three","four","five"]})"
        "\n"
        R"({"id":"b","image":"i/b.png","modality":"infrared","width":64,"height":48,"captions":["  padded  ",""]})"
        "\n");
    const auto res = ingest::parse_caption_file(file);
    REQUIRE(res.samples.size() == 2);
    CHECK(std::get<ingest::CaptionsPayload>(res.samples[0].payload).captions.size() == 5);
    const auto& b = std::get<ingest::CaptionsPayload>(res.samples[1].payload);
    REQUIRE(b.captions.size() == 1);
    CHECK(b.captions[0] == "padded");
    REQUIRE(res.diagnostics.size() == 1);
    CHECK(res.diagnostics[0].severity == Severity::warning);
}

TEST_CASE("caption file: malformed line carries its line number") {
    testing::TempDir tmp;
    const auto file = tmp.write(
        "cap.jsonl",
        R"({"id":"a","image":"i","modality":"optical","width":10,"height":10,"captions":["x"]})"
        "\n"
        "{not json\n");
    const auto res = ingest::parse_caption_file(file);
    CHECK(res.samples.size() == 1);
    REQUIRE(res.diagnostics.size() == 1);
    CHECK(res.diagnostics[0].line == 2);
    CHECK(res.diagnostics[0].severity == Severity::error);
}

TEST_CASE("vqa file: pairs preserved in order") {
    testing::TempDir tmp;
    const auto file = tmp.write(
        "vqa.jsonl",
        R"({"id":"v1","image":"i","modality":"optical","width":10,"height":10,"qa":[{"question":"How many planes?","answer":"4"},{"question":"Is there a runway?","answer":"yes"}]})"
        "\n");
    const auto res = ingest::parse_vqa_file(file);
    REQUIRE(res.samples.size() == 1);
    const auto& qa = std::get<ingest::VqaPayload>(res.samples[0].payload);
    REQUIRE(qa.pairs.size() == 2);
    CHECK(qa.pairs[0].answer == "4");
    CHECK(qa.pairs[1].question == "Is there a runway?");
}

TEST_CASE("grounding file: bounds checking per mode") {
    testing::TempDir tmp;
    const auto file = tmp.write(
        "g.jsonl",
        R"({"id":"g1","image":"i","modality":"optical","width":100,"height":100,"groundings":[{"expression":"the white storage tank","box":[10,10,60,60]},{"expression":"oversized","box":[10,10,160,60]}]})"
        "\n");

    const auto strict = ingest::parse_grounding_file(file, geom::BoundsMode::strict);
    REQUIRE(strict.samples.size() == 1);
    CHECK(std::get<ingest::GroundingPayload>(strict.samples[0].payload).items.size() == 1);
    CHECK(error_count(strict.diagnostics) == 1);

    const auto lenient = ingest::parse_grounding_file(file, geom::BoundsMode::lenient);
    REQUIRE(lenient.samples.size() == 1);
    CHECK(std::get<ingest::GroundingPayload>(lenient.samples[0].payload).items.size() == 2);
    CHECK(lenient.diagnostics.empty());
}

TEST_CASE("dota annotation: instances, metadata lines, bad lines") {
    testing::TempDir tmp;
    const auto file = tmp.write("P0001.txt",
                                "imagesource:GoogleEarth\n"
                                "gsd:0.5\n"
                                "1 1 3 1 3 3 1 3 plane 0\n"
                                "10 10 20 10 20 20 10 20 ship 1\n");
    ingest::DotaImageMeta meta{"P0001", "images/P0001.png", Modality::optical, {1024, 1024}};
    const auto res = ingest::parse_dota_annotation(file, meta);
    REQUIRE(res.samples.size() == 1);
    CHECK(res.diagnostics.empty());
    const auto& det = std::get<ingest::DetectionPayload>(res.samples[0].payload);
    REQUIRE(det.instances.size() == 2);
    CHECK(det.instances[0].category == "plane");
    CHECK_FALSE(det.instances[0].difficult);
    CHECK(det.instances[1].difficult);
    const auto& q = std::get<geom::OrientedBox>(det.instances[0].box);
    CHECK(q.corners[0] == geom::Point{1, 1});
    CHECK(q.corners[1] == geom::Point{3, 1});
    CHECK(q.corners[2] == geom::Point{3, 3});
    CHECK(q.corners[3] == geom::Point{1, 3});
}

TEST_CASE("dota annotation: token count and degeneracy diagnostics") {
    testing::TempDir tmp;
    const auto file = tmp.write("bad.txt",
                                "1 1 3 1 3 3 1 3 plane\n"              // 9 tokens
                                "1 1 2 2 3 3 1 5 plane 0\n"            // collinear corners
                                "a b c d e f g h plane 0\n"            // non-numeric
                                "5 5 9 5 9 9 5 9 helicopter 0\n");     // fine
    ingest::DotaImageMeta meta{"bad", "images/bad.png", Modality::infrared, {64, 64}};
    const auto res = ingest::parse_dota_annotation(file, meta);
    REQUIRE(res.samples.size() == 1);
    CHECK(std::get<ingest::DetectionPayload>(res.samples[0].payload).instances.size() == 1);
    CHECK(error_count(res.diagnostics) == 3);
    CHECK(res.diagnostics[0].line == 1);
}

TEST_CASE("validate_corpus: duplicate ids, duplicate captions, clean corpus") {
    std::vector<ingest::SourceSample> samples;
    ingest::SourceSample a;
    a.id = "x";
    a.image_size = {100, 100};
    a.payload = ingest::CaptionsPayload{{"a port", "a port"}};
    ingest::SourceSample b = a;
    b.payload = ingest::CaptionsPayload{{"a beach"}};
    samples = {a, b};

    const auto diags = ingest::validate_corpus(samples);
    REQUIRE(diags.size() == 2);
    CHECK(diags[0].severity == Severity::error);  // duplicate id, reported once
    CHECK(diags[1].severity == Severity::warning);
    CHECK(diags[1].message == "duplicate caption");

    b.id = "y";
    b.payload = ingest::CaptionsPayload{{"a beach"}};
    a.payload = ingest::CaptionsPayload{{"a port"}};
    std::vector<ingest::SourceSample> clean{a, b};
    CHECK(ingest::validate_corpus(clean).empty());
}

TEST_CASE("validate_corpus: out-of-bounds detection box") {
    ingest::SourceSample s;
    s.id = "d";
    s.image_size = {50, 50};
    ingest::DetectionPayload det;
    det.instances.push_back(
        {"plane", geom::OrientedBox{{geom::Point{10, 10}, geom::Point{60, 10},
                                     geom::Point{60, 30}, geom::Point{10, 30}}},
         false});
    s.payload = det;
    const auto diags = ingest::validate_corpus(std::vector{s});
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].message.find("outside image bounds") != std::string::npos);
}

TEST_CASE("canonical files round-trip through write + parse") {
    testing::TempDir tmp;
    const auto cap = tmp.write(
        "cap.jsonl",
        R"({"id":"a","image":"i/a.png","modality":"optical","width":100,"height":100,"captions":["harbour with boats","aerial view"]})"
        "\n"
        R"({"id":"b","image":"i/b.png","modality":"sar","width":64,"height":48,"captions":["bright ship wake"]})"
        "\n");
    const auto first = ingest::parse_caption_file(cap);
    REQUIRE(first.samples.size() == 2);
    ingest::write_caption_file(tmp.path() / "cap2.jsonl", first.samples);
    const auto second = ingest::parse_caption_file(tmp.path() / "cap2.jsonl");
    CHECK(second.samples == first.samples);
    CHECK(second.diagnostics.empty());

    const auto vqa = tmp.write(
        "v.jsonl",
        R"({"id":"v","image":"i","modality":"optical","width":10,"height":10,"qa":[{"question":"How many?","answer":"2"}]})"
        "\n");
    const auto v1 = ingest::parse_vqa_file(vqa);
    ingest::write_vqa_file(tmp.path() / "v2.jsonl", v1.samples);
    CHECK(ingest::parse_vqa_file(tmp.path() / "v2.jsonl").samples == v1.samples);

    const auto g = tmp.write(
        "g.jsonl",
        R"({"id":"g","image":"i","modality":"optical","width":100,"height":100,"groundings":[{"expression":"tank","box":[1,2,30,40]}]})"
        "\n");
    const auto g1 = ingest::parse_grounding_file(g);
    ingest::write_grounding_file(tmp.path() / "g2.jsonl", g1.samples);
    CHECK(ingest::parse_grounding_file(tmp.path() / "g2.jsonl").samples == g1.samples);
}

TEST_CASE("missing file throws IngestError") {
    CHECK_THROWS_AS(ingest::parse_caption_file("/nonexistent/zzz.jsonl"), ingest::IngestError);
}
