// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "../support.hpp"
#include "seqedit/artifacts.hpp"
#include "seqedit/cli.hpp"
#include "seqedit/config.hpp"
#include "seqedit/registry.hpp"

using namespace seqedit;
using testing::bit_equal;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("seqedit_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Validation;
}

void check_bundles_equal(const FeatureBundle& a, const FeatureBundle& b) {
    CHECK(a.step_index == b.step_index);
    REQUIRE(a.attention.size() == b.attention.size());
    for (const auto& [l, f] : a.attention) {
        const auto& g = b.attention.at(l);
        for (auto [x, y] : {std::pair{f.q, g.q}, std::pair{f.k, g.k}, std::pair{f.v, g.v}}) {
            REQUIRE((x == nullptr) == (y == nullptr));
            if (x) CHECK(bit_equal(*x, *y));
        }
    }
    REQUIRE(a.resnet.size() == b.resnet.size());
    for (const auto& [l, f] : a.resnet) CHECK(bit_equal(*f, *b.resnet.at(l)));
    REQUIRE((a.unconditional == nullptr) == (b.unconditional == nullptr));
    if (a.unconditional) check_bundles_equal(*a.unconditional, *b.unconditional);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("registry rejects duplicates and lists ids for unknown ones") {
    auto reg = AdapterRegistry::with_builtins();
    CHECK(reg.backends.contains("toy"));
    CHECK(reg.codecs.contains("identity"));
    CHECK(reg.embedders.contains("stub"));
    CHECK(reg.mask_providers.ids() == std::vector<std::string>{"constant", "file", "rectangle"});
    CHECK(kind_of([&] { reg.register_backend("toy", [](const nlohmann::json&, std::uint64_t) {
              return std::unique_ptr<DenoiserBackend>(new ToyUNet());
          }); }) == ErrorKind::Registry);
    try {
        reg.embedders.create("clip-l14", {}, 0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Registry);
        CHECK(std::string(e.what()).find("registered: stub") != std::string::npos);
    }
    reg.register_embedder("other", [](const nlohmann::json&, std::uint64_t seed) {
        return std::unique_ptr<Embedder>(new StubEmbedder(seed));
    });
    CHECK(reg.embedders.create("other", {}, 3)->id() == "stub");
}

TEST_CASE("toy backend parameters") {
    const auto reg = AdapterRegistry::with_builtins();
    auto a = reg.backends.create("toy", {{"seed", 9}}, 1);
    auto b = reg.backends.create("toy", {}, 9);
    Tensor z({3, 8, 8}, 0.25);
    CHECK(bit_equal(a->predict_noise(z, 400, a->encode_text("x"), {}).eps,
                    b->predict_noise(z, 400, b->encode_text("x"), {}).eps));
    CHECK(kind_of([&] { reg.backends.create("toy", {{"sede", 9}}, 1); }) == ErrorKind::Config);
}

TEST_CASE("config round trip") {
    RunConfig c;
    c.seed = 99;
    c.steps = 30;
    c.s_edit = 10;
    c.s_context = 25;
    c.inject_k = false;
    c.layers = LayerSet{{1, 2}, {0}};
    c.guidance_scale = 5.0;
    c.target_prompt = "a snowy street";
    c.reference = "fixed";
    c.ref_index = 2;
    c.mask = MaskSpec{"rectangle", "car", {{"x1", 0.5}}, false};
    c.backend.params = {{"base_channels", 8}};
    const auto j = to_json(c);
    CHECK(config_from_json(j) == c);
    CHECK(to_json(config_from_json(j)) == j);

    const auto dir = scratch("config");
    save_config(c, dir / "run.json");
    CHECK(load_config(dir / "run.json") == c);
}

TEST_CASE("config errors") {
    CHECK(kind_of([] { config_from_json({{"stepz", 3}}); }) == ErrorKind::Config);
    CHECK(kind_of([] { config_from_json({{"schedule", {{"s_edit", "ten"}}}}); }) == ErrorKind::Config);
    RunConfig c;
    c.s_edit = 40;
    c.s_context = 30;
    CHECK(kind_of([&] { validate_config(c); }) == ErrorKind::Config);
    CHECK(kind_of([] { load_config("/nonexistent/run.json"); }) == ErrorKind::Io);
    const auto dir = scratch("badconfig");
    write_text_file(dir / "bad.json", "{ not json");
    CHECK(kind_of([&] { load_config(dir / "bad.json"); }) == ErrorKind::Config);
}

TEST_CASE("schedule from config") {
    RunConfig c;
    c.steps = 50;
    c.s_edit = 15;
    c.inject_q = false;
    const auto s = schedule_of(c);
    CHECK(s.total_steps == 50);
    CHECK(s.s_edit == 15);
    CHECK(s.s_context == 50);
    CHECK_FALSE(s.inject_q);
}

TEST_CASE("tensor container round trip and layout") {
    const auto dir = scratch("container");
    TensorFile f;
    f.metadata = {{"kind", "test"}};
    f.tensors["b"] = Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, -6.5});
    f.tensors["a"] = Tensor({1}, std::vector<double>{0.1});
    write_tensor_file(f, dir / "t.st");
    const auto back = read_tensor_file(dir / "t.st");
    CHECK(back.metadata == f.metadata);
    CHECK(back.tensors == f.tensors);

    std::ifstream in(dir / "t.st", std::ios::binary);
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 8);
    CHECK(header_len % 8 == 0);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    const auto h = nlohmann::json::parse(header);
    CHECK(h.at("a").at("dtype") == "F64");
    CHECK(h.at("b").at("shape") == nlohmann::json::array({2, 3}));
    CHECK(h.at("a").at("data_offsets") == nlohmann::json::array({0, 8}));
    CHECK(h.at("b").at("data_offsets") == nlohmann::json::array({8, 56}));

    std::ofstream(dir / "trunc.st", std::ios::binary) << "abc";
    CHECK(kind_of([&] { read_tensor_file(dir / "trunc.st"); }) == ErrorKind::Io);
}

TEST_CASE("records and guided edit traces round trip") {
    testing::ToyRig rig(4);
    InversionOptions opt;
    opt.image_id = "frame";
    opt.layers = rig.backend.default_layers();
    const auto rec = invert(make_shape_image(16, 16, 3), opt, rig.noise, rig.backend, rig.codec);
    const auto dir = scratch("records");
    save_inversion_record(rec, dir / "rec.st");
    const auto rec2 = load_inversion_record(dir / "rec.st");
    CHECK(rec2.image_id == "frame");
    CHECK(rec2.layers == rec.layers);
    CHECK(rec2.latents == rec.latents);
    CHECK(rec2.eps_inv == rec.eps_inv);
    for (int s = 0; s < 4; ++s) check_bundles_equal(rec.trace.at(s), rec2.trace.at(s));

    auto plan = testing::toy_plan(rig, 1, 3);
    plan.guidance_scale = 7.5;
    UnifiedSampler sampler(rig.backend, rig.noise, plan);
    const auto edit = sampler.edit_reference(rec);
    REQUIRE(edit.trace.features.at(0).unconditional != nullptr);
    save_edit_trace(edit.trace, dir / "trace.st");
    const auto trace2 = load_edit_trace(dir / "trace.st");
    CHECK(trace2.total_steps == 4);
    CHECK(trace2.final_latent == edit.trace.final_latent);
    REQUIRE(trace2.features.size() == 3);
    for (int s = 0; s < 3; ++s) check_bundles_equal(edit.trace.features.at(s), trace2.features.at(s));
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_bytes("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_bytes("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const auto dir = scratch("sha");
    write_text_file(dir / "sub" / "abc.txt", "abc");
    CHECK(read_text_file(dir / "sub" / "abc.txt") == "abc");
    CHECK(sha256_file(dir / "sub" / "abc.txt") == sha256_bytes("abc"));
}

TEST_CASE("manifest round trip") {
    RunManifest m;
    m.command = "edit-video";
    m.config.seed = 5;
    m.backend_id = "toy";
    m.layers = {{0, 1, 2}, {0}};
    m.images = {{"0000", "in/0000.png", "aa", "frames/0000.png", "bb"}};
    m.artifacts = {{"config.json", "cc"}};
    m.details = {{"crop_plan", {{"windows", 7}}}};
    m.completed = 1;
    m.complete = true;
    CHECK(manifest_from_json(to_json(m)) == m);
    auto j = to_json(m);
    j["format"] = "other/9";
    CHECK(kind_of([&] { manifest_from_json(j); }) == ErrorKind::Config);
}

TEST_CASE("exit code classes are distinct") {
    CHECK(exit_code_for(ErrorKind::Validation) == ExitCode::Config);
    CHECK(exit_code_for(ErrorKind::Range) == ExitCode::Config);
    CHECK(exit_code_for(ErrorKind::Config) == ExitCode::Config);
    CHECK(exit_code_for(ErrorKind::Io) == ExitCode::Io);
    CHECK(exit_code_for(ErrorKind::Shape) == ExitCode::Backend);
    CHECK(exit_code_for(ErrorKind::Numeric) == ExitCode::Backend);
    CHECK(exit_code_for(ErrorKind::Backend) == ExitCode::Backend);
    CHECK(exit_code_for(ErrorKind::Registry) == ExitCode::Registry);
}

}
