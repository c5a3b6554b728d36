// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures for the unit and acceptance tests.

#pragma once

#include <cmath>
#include <cstring>
#include <random>

#include "seqedit/ddim.hpp"
#include "seqedit/drivers.hpp"
#include "seqedit/toy_data.hpp"
#include "seqedit/toy_unet.hpp"

namespace seqedit::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Tensor t(shape);
    for (auto& v : t.values()) v = n(rng);
    return t;
}

/// Toy backend, identity codec and a schedule, wired into a SequenceContext.
struct ToyRig {
    ToyUNet backend;
    IdentityCodec codec;
    NoiseSchedule noise;
    TraceAccessLog log;

    explicit ToyRig(int steps = 50, std::uint64_t seed = 1234) : backend(config(seed)), noise(steps) {}

    SequenceContext context(std::string inversion_prompt = "", double inversion_guidance = 1.0) {
        return {backend, codec, noise, {std::move(inversion_prompt), inversion_guidance}, &log};
    }

    static ToyUNetConfig config(std::uint64_t seed) {
        ToyUNetConfig c;
        c.seed = seed;
        return c;
    }
};

inline EditPlan toy_plan(const ToyRig& rig, int s_edit, int s_context, std::string target = "a red cube on grass") {
    EditPlan p;
    p.target_prompt = std::move(target);
    p.schedule.total_steps = rig.noise.steps();
    p.schedule.s_edit = s_edit;
    p.schedule.s_context = s_context;
    p.layers = rig.backend.default_layers();
    return p;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::equal(a.values().begin(), a.values().end(), b.values().begin(),
                      [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; });
}

}  // namespace seqedit::testing
