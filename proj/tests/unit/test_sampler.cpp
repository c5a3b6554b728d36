// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "../support.hpp"

using namespace seqedit;
using testing::bit_equal;
using testing::toy_plan;
using testing::ToyRig;

namespace {

InversionRecord invert_toy(ToyRig& rig, std::uint64_t image_seed, const std::string& id) {
    InversionOptions opt;
    opt.image_id = id;
    opt.layers = rig.backend.default_layers();
    return invert(make_shape_image(16, 16, image_seed), opt, rig.noise, rig.backend, rig.codec);
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("disabled toggles reduce both paths to vanilla sampling") {
    ToyRig rig(10);
    const auto ref = invert_toy(rig, 1, "a");
    const auto other = invert_toy(rig, 2, "b");
    auto plan = toy_plan(rig, 4, 8);
    plan.schedule.inject_f = plan.schedule.inject_q = plan.schedule.inject_k = plan.schedule.inject_v = false;
    UnifiedSampler sampler(rig.backend, rig.noise, plan);
    const auto r = sampler.edit_reference(ref);
    CHECK(bit_equal(r.latent, sample_vanilla(ref.terminal(), plan.target_prompt, plan.guidance_scale, rig.noise,
                                             rig.backend)));
    const auto f = sampler.edit_follower(other, ref.trace, r.trace);
    CHECK(bit_equal(f.latent, sample_vanilla(other.terminal(), plan.target_prompt, plan.guidance_scale, rig.noise,
                                             rig.backend)));
}

TEST_CASE("each toggle changes values but never shapes") {
    ToyRig rig(10);
    const auto ref = invert_toy(rig, 3, "a");
    const auto other = invert_toy(rig, 4, "b");
    const auto plan = toy_plan(rig, 5, 10);
    UnifiedSampler full(rig.backend, rig.noise, plan);
    const auto r = full.edit_reference(ref);
    const auto f = full.edit_follower(other, ref.trace, r.trace);
    for (int which = 0; which < 4; ++which) {
        auto p = plan;
        bool* toggles[] = {&p.schedule.inject_f, &p.schedule.inject_q, &p.schedule.inject_k, &p.schedule.inject_v};
        *toggles[which] = false;
        UnifiedSampler s(rig.backend, rig.noise, p);
        const auto rr = s.edit_reference(ref);
        const auto ff = s.edit_follower(other, ref.trace, rr.trace);
        CHECK(ff.latent.shape() == f.latent.shape());
        CHECK_FALSE(bit_equal(ff.latent, f.latent));
        if (which != 3) CHECK_FALSE(bit_equal(rr.latent, r.latent));
    }
}

TEST_CASE("edit traces cover the steps before s_context") {
    ToyRig rig(10);
    const auto ref = invert_toy(rig, 5, "a");
    UnifiedSampler sampler(rig.backend, rig.noise, toy_plan(rig, 3, 7));
    const auto r = sampler.edit_reference(ref);
    CHECK(r.trace.features.size() == 7);
    CHECK(r.trace.features.origin() == TraceOrigin::Edit);
    const auto& b = r.trace.features.at(6);
    CHECK(b.step_index == 6);
    for (const auto& [layer, a] : b.attention) {
        CHECK(a.q == nullptr);
        CHECK(a.k != nullptr);
        CHECK(a.v != nullptr);
    }
    CHECK(b.resnet.size() == 1);
    CHECK(bit_equal(r.trace.final_latent, r.latent));
}

TEST_CASE("trace reads respect the schedule") {
    ToyRig rig(10);
    const auto ref = invert_toy(rig, 6, "a");
    const auto other = invert_toy(rig, 7, "b");
    UnifiedSampler sampler(rig.backend, rig.noise, toy_plan(rig, 3, 7), &rig.log);
    const auto r = sampler.edit_reference(ref);
    sampler.edit_follower(other, ref.trace, r.trace);
    CHECK(rig.log.reads(TraceSource::OwnInverted) > 0);
    CHECK(rig.log.reads(TraceSource::ReferenceInverted) > 0);
    CHECK(rig.log.reads(TraceSource::ReferenceLive) > 0);
    CHECK(rig.log.reads_at_or_after(TraceSource::OwnInverted, 3) == 0);
    CHECK(rig.log.reads_at_or_after(TraceSource::ReferenceInverted, 3) == 0);
    CHECK(rig.log.reads_at_or_after(TraceSource::ReferenceLive, 7) == 0);
    rig.log.clear();
    CHECK(rig.log.reads(TraceSource::ReferenceLive) == 0);
}

TEST_CASE("a follower on a copy of the reference matches it") {
    ToyRig rig(10);
    const auto ref = invert_toy(rig, 8, "a");
    const auto copy = invert_toy(rig, 8, "b");
    UnifiedSampler sampler(rig.backend, rig.noise, toy_plan(rig, 4, 10));
    const auto r = sampler.edit_reference(ref);
    const auto f = sampler.edit_follower(copy, ref.trace, r.trace);
    CHECK(relative_l2(f.latent, r.latent) <= 1e-12);
}

TEST_CASE("lockstep contract checks") {
    ToyRig rig(6);
    const auto ref = invert_toy(rig, 9, "a");
    const auto other = invert_toy(rig, 10, "b");
    UnifiedSampler sampler(rig.backend, rig.noise, toy_plan(rig, 2, 4));
    auto r = PathState::start(ref);
    auto f = PathState::start(other);
    CHECK_THROWS_AS(sampler.step_follower_after(f, r), Error);
    sampler.step_reference(r);
    CHECK_THROWS_AS(sampler.step_pair(r, f), Error);
    sampler.step_follower_after(f, r);
    while (!r.done()) sampler.step_pair(r, f);
    CHECK(f.done());
    CHECK_THROWS_AS(sampler.step_reference(r), Error);

    UnifiedSampler whole(rig.backend, rig.noise, toy_plan(rig, 2, 4));
    const auto rr = whole.edit_reference(ref);
    const auto ff = whole.edit_follower(other, ref.trace, rr.trace);
    CHECK(bit_equal(r.latent, rr.latent));
    CHECK(bit_equal(f.latent, ff.latent));
}

TEST_CASE("mismatched records and short traces are rejected") {
    ToyRig rig(10);
    const auto ref = invert_toy(rig, 11, "a");
    ToyRig other_rig(5);
    const auto short_rec = invert_toy(other_rig, 11, "b");
    UnifiedSampler sampler(rig.backend, rig.noise, toy_plan(rig, 3, 7));
    CHECK_THROWS_AS(sampler.edit_reference(short_rec), Error);
    const auto r = sampler.edit_reference(ref);
    EditTrace truncated = r.trace;
    auto bundles = truncated.features.bundles();
    bundles.pop_back();
    truncated.features = FeatureTrace(TraceOrigin::Edit, "a", bundles);
    CHECK_THROWS_AS(sampler.edit_follower(ref, ref.trace, truncated), Error);
}

TEST_CASE("plans must match the noise schedule") {
    ToyRig rig(10);
    auto plan = toy_plan(rig, 3, 7);
    plan.schedule.total_steps = 20;
    CHECK_THROWS_AS(UnifiedSampler(rig.backend, rig.noise, plan), Error);
}

}
