// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <filesystem>
#include <random>

#include "../support.hpp"
#include "seqedit/artifacts.hpp"
#include "seqedit/mask.hpp"

using namespace seqedit;
using testing::bit_equal;
using testing::toy_plan;
using testing::ToyRig;

namespace {

std::vector<std::int32_t> brute_coverage(const CropPlan& p) {
    std::vector<std::int32_t> c(static_cast<std::size_t>(p.height * p.width), 0);
    for (const auto& o : p.offsets)
        for (std::int64_t y = o.y; y < o.y + p.window; ++y)
            for (std::int64_t x = o.x; x < o.x + p.window; ++x) ++c[static_cast<std::size_t>(y * p.width + x)];
    return c;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("seqedit_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE("drivers") {

TEST_CASE("default panorama plan has seven windows") {
    const auto p = make_crop_plan(512, 2048, 512, 256);
    REQUIRE(p.offsets.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(p.offsets[i] == WindowOffset{0, static_cast<std::int64_t>(i) * 256});
    CHECK_FALSE(p.snapped);
    CHECK(p.coverage == brute_coverage(p));
}

TEST_CASE("window equal to the canvas") {
    const auto p = make_crop_plan(512, 512, 512, 256);
    REQUIRE(p.offsets.size() == 1);
    for (auto c : p.coverage) CHECK(c == 1);
}

TEST_CASE("non-divisible width snaps the last window") {
    const auto p = make_crop_plan(512, 900, 512, 256);
    REQUIRE(p.offsets.size() == 3);
    CHECK(p.offsets[0].x == 0);
    CHECK(p.offsets[1].x == 256);
    CHECK(p.offsets[2].x == 388);
    CHECK(p.snapped);
    CHECK(p.coverage == brute_coverage(p));
    for (auto c : p.coverage) CHECK(c >= 1);
}

TEST_CASE("two-dimensional plans cover the canvas") {
    const auto p = make_crop_plan(40, 56, 16, 12);
    CHECK(p.coverage == brute_coverage(p));
    for (auto c : p.coverage) CHECK(c >= 1);
    CHECK(p.offsets.front() == WindowOffset{0, 0});
    CHECK(p.offsets.back() == WindowOffset{24, 40});
}

TEST_CASE("bad plans are rejected") {
    CHECK_THROWS_AS(make_crop_plan(512, 2048, 1024, 256), Error);
    CHECK_THROWS_AS(make_crop_plan(512, 2048, 512, 0), Error);
    CHECK_THROWS_AS(make_crop_plan(512, 2048, 256, 512), Error);
}

TEST_CASE("scatter average of constants") {
    const auto single = make_crop_plan(4, 4, 4, 4);
    std::mt19937_64 rng(1);
    const auto pred = testing::random_tensor({2, 4, 4}, rng);
    CHECK(bit_equal(scatter_average({pred}, single), pred));

    const auto p = make_crop_plan(4, 8, 4, 2);
    REQUIRE(p.offsets.size() == 3);
    const auto two = make_crop_plan(4, 6, 4, 2);
    REQUIRE(two.offsets.size() == 2);
    const auto out = scatter_average({Tensor({1, 4, 4}, 2.0), Tensor({1, 4, 4}, 5.0)}, two);
    for (int y = 0; y < 4; ++y) {
        CHECK(out.at(0, y, 0) == 2.0);
        CHECK(out.at(0, y, 1) == 2.0);
        CHECK(out.at(0, y, 2) == 3.5);
        CHECK(out.at(0, y, 3) == 3.5);
        CHECK(out.at(0, y, 4) == 5.0);
        CHECK(out.at(0, y, 5) == 5.0);
    }
    const auto ones = scatter_average({Tensor({1, 4, 4}, 1.0), Tensor({1, 4, 4}, 1.0), Tensor({1, 4, 4}, 1.0)}, p);
    for (double v : ones.values()) CHECK(v == 1.0);
    CHECK_THROWS_AS(scatter_average({Tensor({1, 4, 4})}, p), Error);
}

TEST_CASE("scatter average matches a per-pixel brute force") {
    std::mt19937_64 rng(7);
    const auto p = make_crop_plan(12, 30, 8, 5);
    std::vector<Tensor> preds;
    for (std::size_t i = 0; i < p.offsets.size(); ++i) preds.push_back(testing::random_tensor({2, 8, 8}, rng));
    const auto out = scatter_average(preds, p);
    for (int c = 0; c < 2; ++c)
        for (std::int64_t y = 0; y < p.height; ++y)
            for (std::int64_t x = 0; x < p.width; ++x) {
                double sum = 0;
                int n = 0;
                for (std::size_t i = 0; i < p.offsets.size(); ++i) {
                    const auto& o = p.offsets[i];
                    if (y < o.y || y >= o.y + 8 || x < o.x || x >= o.x + 8) continue;
                    sum += preds[i].at(c, y - o.y, x - o.x);
                    ++n;
                }
                CHECK(out.at(c, y, x) == sum / n);
            }
}

TEST_CASE("uniform subsampling") {
    CHECK(subsample_uniform(5, 0) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(subsample_uniform(5, 9) == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK(subsample_uniform(10, 4) == std::vector<std::size_t>{0, 3, 6, 9});
    CHECK(subsample_uniform(100, 1) == std::vector<std::size_t>{0});
    const auto picked = subsample_uniform(120, 35);
    CHECK(picked.size() == 35);
    CHECK(picked.front() == 0);
    CHECK(picked.back() == 119);
    for (std::size_t i = 1; i < picked.size(); ++i) CHECK(picked[i] > picked[i - 1]);
}

TEST_CASE("masked noise blend") {
    std::mt19937_64 rng(3);
    const auto a = testing::random_tensor({3, 4, 4}, rng);
    const auto b = testing::random_tensor({3, 4, 4}, rng);
    CHECK(bit_equal(blend_masked_noise(a, b, Mask::constant(4, 4, 1.0)), a));
    CHECK(bit_equal(blend_masked_noise(a, b, Mask::constant(4, 4, 0.0)), b));
    const auto half = blend_masked_noise(a, b, Mask::constant(4, 4, 0.5));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(half[i] == doctest::Approx((a[i] + b[i]) / 2).epsilon(1e-15));
    CHECK_THROWS_AS(blend_masked_noise(a, b, Mask::constant(4, 5, 1.0)), Error);
}

TEST_CASE("mask providers") {
    const Image img(32, 16, 3);
    const auto ones = acquire_mask(img, "", ConstantMaskProvider(1.0), 8, 16);
    for (double v : ones.field().values()) CHECK(v == 1.0);
    const auto left = acquire_mask(img, "", RectangleMaskProvider(0.0, 0.0, 0.5, 1.0), 8, 16);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 16; ++x) CHECK(left(y, x) == (x < 8 ? 1.0 : 0.0));
    const auto clamped = acquire_mask(img, "", ConstantMaskProvider(3.0), 4, 4);
    CHECK(clamped(0, 0) == 1.0);
}

TEST_CASE("file masks round trip within quantization") {
    const auto dir = scratch("mask");
    Tensor field({8, 8});
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = static_cast<double>(i) / 63.0;
    const Mask m(field);
    save_mask(m, dir / "m.png");
    const auto back = load_mask(dir / "m.png");
    CHECK(max_abs_diff(back.field(), m.field()) <= 0.5 / 255 + 1e-12);
    const auto via_provider = acquire_mask(Image(8, 8, 3), "m", FileMaskProvider(dir), 8, 8);
    CHECK(max_abs_diff(via_provider.field(), back.field()) == 0.0);
    CHECK_THROWS_AS(acquire_mask(Image(8, 8, 3), "absent", FileMaskProvider(dir), 8, 8), Error);
}

TEST_CASE("area resampling averages blocks") {
    Tensor f({2, 4}, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});
    const auto r = resample_area(f, 1, 2);
    CHECK(r[0] == doctest::Approx(2.5));
    CHECK(r[1] == doctest::Approx(4.5));
}

TEST_CASE("single-frame video equals a reference edit") {
    ToyRig rig(8);
    auto ctx = rig.context();
    const auto plan = toy_plan(rig, 3, 8);
    const auto frame = make_shape_image(16, 16, 21);
    const auto video = edit_video({frame}, plan, ctx);
    UnifiedSampler sampler(rig.backend, rig.noise, plan);
    const auto rec = invert_for_plan(frame, "f", 0, plan, ctx);
    CHECK(bit_equal(video.latents.at(0), sampler.edit_reference(rec).latent));
}

TEST_CASE("identical frames give identical outputs and reruns are bit-exact") {
    ToyRig rig(8);
    auto ctx = rig.context();
    const auto plan = toy_plan(rig, 3, 8);
    const auto frame = make_shape_image(16, 16, 22);
    const auto a = edit_video({frame, frame, frame}, plan, ctx);
    for (std::size_t i = 1; i < 3; ++i) CHECK(relative_l2(a.latents[i], a.latents[0]) <= 1e-12);
    const auto clip = make_shape_clip(16, 16, 3, 1, 4);
    const auto x = edit_video(clip, plan, ctx);
    const auto y = edit_video(clip, plan, ctx);
    for (std::size_t i = 0; i < 3; ++i) CHECK(bit_equal(x.latents[i], y.latents[i]));
}

TEST_CASE("video needs chained referencing") {
    ToyRig rig(4);
    auto plan = toy_plan(rig, 1, 2);
    plan.reference_strategy = FixedReference{0};
    CHECK_THROWS_AS(edit_video({make_shape_image(16, 16, 1)}, plan, rig.context()), Error);
}

TEST_CASE("resumed chain equals an uninterrupted one") {
    ToyRig rig(8);
    auto ctx = rig.context();
    const auto plan = toy_plan(rig, 3, 8);
    const auto clip = make_shape_clip(16, 16, 3, 2, 9);
    ChainedEditor straight(ctx, plan);
    std::vector<Tensor> expected;
    for (std::size_t i = 0; i < clip.size(); ++i) expected.push_back(straight.edit_next(clip[i], std::to_string(i)).latent);

    const auto dir = scratch("resume");
    {
        ChainedEditor first(ctx, plan);
        first.edit_next(clip[0], "0");
        first.edit_next(clip[1], "1");
        save_inversion_record(*first.predecessor_record(), dir / "rec.st");
        save_edit_trace(*first.predecessor_trace(), dir / "trace.st");
    }
    ChainedEditor resumed(ctx, plan);
    resumed.resume(load_inversion_record(dir / "rec.st"), load_edit_trace(dir / "trace.st"), 2);
    CHECK(resumed.frames_done() == 2);
    CHECK(bit_equal(resumed.edit_next(clip[2], "2").latent, expected[2]));
}

TEST_CASE("multiview followers are order and worker independent") {
    ToyRig rig(6);
    auto ctx = rig.context();
    auto plan = toy_plan(rig, 2, 6);
    plan.reference_strategy = FixedReference{0};
    std::vector<Image> views;
    for (int i = 0; i < 5; ++i) views.push_back(make_shape_image(16, 16, 40 + i));
    const auto serial = edit_multiview(views, plan, ctx);
    MultiviewOptions parallel;
    parallel.workers = 2;
    const auto threaded = edit_multiview(views, plan, ctx, parallel);
    MultiviewOptions reversed;
    reversed.follower_order = {4, 3, 2, 1};
    const auto backwards = edit_multiview(views, plan, ctx, reversed);
    REQUIRE(serial.latents.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(bit_equal(serial.latents[i], threaded.latents[i]));
        CHECK(bit_equal(serial.latents[i], backwards.latents[i]));
        CHECK(serial.images[i] == threaded.images[i]);
    }
    const auto alone = edit_multiview({views[0]}, plan, ctx);
    CHECK(bit_equal(alone.latents[0], serial.latents[0]));
}

TEST_CASE("one-window panorama equals a single-image edit") {
    ToyRig rig(6);
    auto ctx = rig.context();
    const auto plan = toy_plan(rig, 2, 6);
    const auto image = make_shape_image(16, 16, 60);
    PanoramaOptions opt;
    opt.window = 16;
    opt.stride = 8;
    const auto pano = edit_panorama(image, plan, ctx, opt);
    CHECK(pano.pixel_plan.offsets.size() == 1);
    UnifiedSampler sampler(rig.backend, rig.noise, plan);
    const auto rec = invert_for_plan(image, "p", 0, plan, ctx);
    CHECK(bit_equal(pano.latent, sampler.edit_reference(rec).latent));
}

TEST_CASE("two-window panorama equals a hand-composed canvas loop") {
    ToyRig rig(6);
    auto ctx = rig.context();
    const auto plan = toy_plan(rig, 2, 4);
    const auto image = make_shape_image(24, 16, 61);
    const auto lp = make_crop_plan(16, 24, 16, 8);
    REQUIRE(lp.offsets.size() == 2);
    const auto inv = invert_panorama(rig.codec.encode(image), lp, plan, ctx);
    CHECK(inv.canvas_latents.size() == 7);
    CHECK(inv.canvas_eps_inv.size() == 6);
    CHECK(inv.windows.size() == 2);

    UnifiedSampler sampler(rig.backend, rig.noise, plan);
    Tensor canvas = inv.canvas_latents.back();
    for (int s = 0; s < 6; ++s) {
        const auto a = sampler.predict_reference(s, slice_width(canvas, 0, 16), inv.windows[0], 0);
        const auto b = sampler.predict_follower(s, slice_width(canvas, 8, 16), inv.windows[1], inv.windows[0].trace,
                                                s < 4 ? &a.live : nullptr, 1);
        Tensor avg(canvas.shape());
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 24; ++x) {
                    if (x < 8) avg.at(c, y, x) = a.eps.at(c, y, x);
                    else if (x >= 16) avg.at(c, y, x) = b.eps.at(c, y, x - 8);
                    else avg.at(c, y, x) = (a.eps.at(c, y, x) + b.eps.at(c, y, x - 8)) / 2;
                }
        const int level = rig.noise.level_of_step(s);
        canvas = ddim_reverse_step(canvas, avg, level, level - 1, rig.noise);
    }
    CHECK(bit_equal(sample_panorama(inv, plan, ctx), canvas));
}

}
