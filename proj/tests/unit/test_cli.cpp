// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqedit/artifacts.hpp"
#include "seqedit/cli.hpp"
#include "seqedit/image.hpp"

using namespace seqedit;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "seqedit");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("seqedit_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text_file(p)); }

fs::path toy_frames(const fs::path& root, int count, const std::string& kind = "clip") {
    const auto dir = root / "in";
    REQUIRE(run({"toy-data", "--out", dir.string(), "--kind", kind, "--width", "16", "--height", "16", "--count",
                 std::to_string(count)}) == 0);
    return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
    CHECK(run({}) == 2);
    CHECK(run({"frobnicate"}) == 2);
    CHECK(run({"invert", "x.png"}) == 2);
    CHECK(run({"edit-video", "--help"}) == 0);
}

TEST_CASE("invert writes a fifty-step record and is deterministic") {
    const auto root = scratch("invert");
    const auto in = toy_frames(root, 1);
    const auto img = (in / "0000.png").string();
    REQUIRE(run({"invert", img, "--out", (root / "a").string(), "--quiet"}) == 0);
    REQUIRE(run({"invert", img, "--out", (root / "b").string(), "--quiet"}) == 0);
    const auto rec = load_inversion_record(root / "a" / "records" / "0000.st");
    CHECK(rec.total_steps == 50);
    CHECK(rec.trace.size() == 50);
    CHECK(read_text_file(root / "a" / "manifest.json") == read_text_file(root / "b" / "manifest.json"));
    const auto m = load_manifest(root / "a" / "manifest.json");
    CHECK(m.artifacts.front().path == "config.json");
    for (const auto& a : m.artifacts) CHECK(sha256_file(root / "a" / a.path) == a.sha256);
    CHECK(fs::exists(root / "a" / "timings.json"));
}

TEST_CASE("failure classes map to exit codes") {
    const auto root = scratch("codes");
    const auto in = toy_frames(root, 1);
    const auto out = (root / "out").string();
    CHECK(run({"invert", (root / "missing.png").string(), "--out", out, "--quiet"}) == 4);
    CHECK(run({"invert", in.string(), "--out", out, "--backend", "sd21", "--quiet"}) == 6);
    CHECK(run({"edit-video", in.string(), "--out", out, "--steps", "10", "--s-edit", "8", "--s-context", "4",
               "--quiet"}) == 3);
    write_text_file(root / "bad.json", "{\"stepz\": 3}");
    CHECK(run({"invert", in.string(), "--out", out, "--config", (root / "bad.json").string(), "--quiet"}) == 3);
    CHECK(run({"invert", in.string(), "--out", out, "--width", "18", "--quiet"}) == 3);
}

TEST_CASE("one-frame video gives one edited image") {
    const auto root = scratch("video1");
    const auto in = toy_frames(root, 1);
    REQUIRE(run({"edit-video", in.string(), "--out", (root / "out").string(), "--steps", "6", "--s-edit", "2",
                 "--s-context", "6", "--target-prompt", "a watercolor", "--quiet"}) == 0);
    CHECK(fs::exists(root / "out" / "frames" / "0000.png"));
    const auto m = load_manifest(root / "out" / "manifest.json");
    CHECK(m.complete);
    CHECK(m.config.steps == 6);
}

TEST_CASE("video defaults are 15 and 50") {
    const auto root = scratch("videodefaults");
    const auto in = toy_frames(root, 1);
    REQUIRE(run({"edit-video", in.string(), "--out", (root / "out").string(), "--quiet"}) == 0);
    const auto m = load_manifest(root / "out" / "manifest.json");
    CHECK(m.config.steps == 50);
    CHECK(m.config.s_edit == 15);
    CHECK(m.config.s_context == 50);
    CHECK(m.images.size() == 1);
}

TEST_CASE("interrupted video resumes to the same outputs") {
    const auto root = scratch("resume");
    const auto in = toy_frames(root, 3);
    const std::vector<std::string> common{"--steps", "6", "--s-edit", "2", "--s-context", "4", "--target-prompt",
                                          "a snowy scene", "--quiet"};
    auto args = [&](const fs::path& out, std::vector<std::string> extra) {
        std::vector<std::string> a{"edit-video", in.string(), "--out", out.string()};
        a.insert(a.end(), common.begin(), common.end());
        a.insert(a.end(), extra.begin(), extra.end());
        return a;
    };
    REQUIRE(run(args(root / "full", {})) == 0);
    REQUIRE(run(args(root / "part", {"--stop-after", "1"})) == 0);
    CHECK_FALSE(load_manifest(root / "part" / "manifest.json").complete);
    CHECK_FALSE(fs::exists(root / "part" / "frames" / "0001.png"));
    const auto first_frame = read_text_file(root / "part" / "frames" / "0000.png");
    REQUIRE(run(args(root / "part", {"--resume"})) == 0);
    CHECK(read_text_file(root / "part" / "frames" / "0000.png") == first_frame);
    for (const char* f : {"0000.png", "0001.png", "0002.png"})
        CHECK(read_text_file(root / "full" / "frames" / f) == read_text_file(root / "part" / "frames" / f));
    CHECK(read_text_file(root / "full" / "manifest.json") == read_text_file(root / "part" / "manifest.json"));
    CHECK(run(args(root / "part", {"--resume", "--seed", "4"})) == 3);
}

TEST_CASE("panorama plans") {
    const auto root = scratch("pano");
    const auto in = toy_frames(root, 1);
    const auto img = (in / "0000.png").string();
    REQUIRE(run({"edit-panorama", img, "--out", (root / "plan").string(), "--dry-run", "--quiet"}) == 0);
    auto plan = load_manifest(root / "plan" / "manifest.json").details.at("crop_plan");
    CHECK(plan.at("windows") == 7);
    CHECK(plan.at("snapped") == false);
    REQUIRE(run({"edit-panorama", img, "--out", (root / "snap").string(), "--width", "900", "--dry-run",
                 "--quiet"}) == 0);
    plan = load_manifest(root / "snap" / "manifest.json").details.at("crop_plan");
    CHECK(plan.at("snapped") == true);
    CHECK(plan.at("offsets").back() == nlohmann::json::array({0, 388}));
    REQUIRE(run({"edit-panorama", img, "--out", (root / "one").string(), "--width", "16", "--height", "16",
                 "--window", "16", "--stride", "8", "--steps", "4", "--s-edit", "2", "--s-context", "2",
                 "--quiet"}) == 0);
    CHECK(load_image(root / "one" / "panorama.png").width == 16);
}

TEST_CASE("views with several workers match one worker") {
    const auto root = scratch("views");
    const auto in = toy_frames(root, 3, "set");
    const std::vector<std::string> base{"edit-views", in.string(), "--steps", "4", "--s-edit", "2", "--s-context",
                                        "4", "--quiet", "--out"};
    auto a = base, b = base;
    a.push_back((root / "w1").string());
    b.push_back((root / "w2").string());
    b.insert(b.end(), {"--workers", "2"});
    REQUIRE(run(a) == 0);
    REQUIRE(run(b) == 0);
    for (const char* f : {"0000.png", "0001.png", "0002.png"})
        CHECK(read_text_file(root / "w1" / "views" / f) == read_text_file(root / "w2" / "views" / f));
    CHECK(run({"edit-views", in.string(), "--steps", "4", "--s-edit", "2", "--s-context", "4", "--ref-index", "3",
               "--quiet", "--out", (root / "bad").string()}) == 3);
}

TEST_CASE("evaluate") {
    const auto root = scratch("eval");
    const auto in = toy_frames(root, 3, "set");
    REQUIRE(run({"evaluate", in.string(), in.string(), "--src-text", "shapes", "--trg-text", "painted shapes",
                 "--out", (root / "same").string(), "--quiet"}) == 0);
    const auto report = read_json(root / "same" / "metrics.json");
    CHECK(report.at("consistency_score").get<double>() < 1.0 + 1e-15);
    CHECK(report.at("mean_structure_distance") == 0.0);
    CHECK(report.at("mean_directional_score") == 0.0);

    const auto copies = root / "copies";
    fs::create_directories(copies);
    for (int i = 0; i < 3; ++i) fs::copy_file(in / "0000.png", copies / ("000" + std::to_string(i) + ".png"));
    REQUIRE(run({"evaluate", copies.string(), copies.string(), "--src-text", "a", "--trg-text", "b", "--out",
                 (root / "ident").string(), "--quiet"}) == 0);
    CHECK(read_json(root / "ident" / "metrics.json").at("consistency_score") == 1.0);

    fs::remove(copies / "0002.png");
    CHECK(run({"evaluate", in.string(), copies.string(), "--src-text", "a", "--trg-text", "b", "--out",
               (root / "missing").string(), "--quiet"}) == 4);
}

}
