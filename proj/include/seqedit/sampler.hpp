// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "seqedit/core.hpp"
#include "seqedit/ddim.hpp"
#include "seqedit/denoiser.hpp"

namespace seqedit {

/// Live features (K, V per attention layer, f per resnet layer) of an edited
/// path, recorded for every step s < s_context.
struct EditTrace {
    FeatureTrace features;
    Tensor final_latent;
    int total_steps = 0;
};

/// Which trace a feature was read from.
enum class TraceSource { OwnInverted, ReferenceInverted, ReferenceLive };

/// Counts trace reads per (source, step); used to check that the schedule
/// gates every read. Safe to share between workers.
class TraceAccessLog {
public:
    void record(TraceSource source, int step);
    std::size_t reads(TraceSource source) const;
    /// Reads of `source` at steps >= step.
    std::size_t reads_at_or_after(TraceSource source, int step) const;
    void clear();

private:
    mutable std::mutex m_mutex;
    std::vector<std::pair<TraceSource, int>> m_reads;
};

struct StepPrediction {
    Tensor eps;
    FeatureBundle live;  // K, V, f of this path at this step; empty when not recorded
};

/// Sampling state of one edited path.
struct PathState {
    const InversionRecord* record = nullptr;
    const Mask* mask = nullptr;
    std::uint64_t seed_index = 0;
    Tensor latent;
    int next_step = 0;
    std::vector<FeatureBundle> live;

    static PathState start(const InversionRecord& record, const Mask* mask = nullptr, std::uint64_t seed_index = 0);
    bool done() const { return record && next_step >= record->total_steps; }
    /// Bundle recorded at step s (throws when absent).
    const FeatureBundle& live_at(int step) const;
    EditTrace finish() const;
};

struct EditResult {
    Tensor latent;
    EditTrace trace;
};

/// The reference/follower editing sampler.
///
/// Reference path, step s:
///   full injection: Q, K, f <- inverted reference features; V live
///   context only:   no overrides
/// Follower path, step s:
///   full injection: Q <- own inverted Q, K <- inverted reference K,
///                   V <- live reference V, f <- inverted reference f
///   context only:   K, V, f <- live reference features; Q live
/// Vanilla steps run without hooks. Disabled toggles are never overridden.
/// Under guidance each branch takes its overrides from the same branch of the
/// source features when they were captured per branch.
/// Both paths record their live K, V and f while s < s_context.
class UnifiedSampler {
public:
    UnifiedSampler(DenoiserBackend& backend, const NoiseSchedule& noise, EditPlan plan,
                   TraceAccessLog* access_log = nullptr);

    const EditPlan& plan() const noexcept { return m_plan; }
    const NoiseSchedule& noise() const noexcept { return m_noise; }
    DenoiserBackend& backend() noexcept { return m_backend; }

    /// Noise prediction only; the caller advances the latent.
    StepPrediction predict_reference(int step, const Tensor& latent, const InversionRecord& own,
                                     std::uint64_t seed_index = 0);
    StepPrediction predict_follower(int step, const Tensor& latent, const InversionRecord& own,
                                    const FeatureTrace& reference_inverted, const FeatureBundle* reference_live,
                                    std::uint64_t seed_index = 0);

    /// DDIM update of sampling step s.
    Tensor advance(int step, const Tensor& latent, const Tensor& eps) const;

    /// One full reference step (predict, blend with the mask, advance).
    void step_reference(PathState& ref);
    /// One full follower step. reference_live must be the reference bundle
    /// of the follower's current step when that step is below s_context.
    void step_follower(PathState& follower, const FeatureTrace& reference_inverted,
                       const FeatureBundle* reference_live);
    /// Lockstep: the reference steps first and its live features feed the
    /// follower at the same step. Both paths must sit at the same step.
    void step_pair(PathState& ref, PathState& follower);
    /// Follower step fed from a reference that has already taken this step.
    void step_follower_after(PathState& follower, const PathState& ref);

    EditResult edit_reference(const InversionRecord& record, const Mask* mask = nullptr,
                              std::uint64_t seed_index = 0);
    EditResult edit_follower(const InversionRecord& record, const FeatureTrace& reference_inverted,
                             const EditTrace& reference_edit, const Mask* mask = nullptr,
                             std::uint64_t seed_index = 0);

private:
    /// Builds the conditional plan and, under guidance, the unconditional one.
    template <typename Build>
    HookPlan per_branch(Build build) const {
        HookPlan hooks = build(FeatureBundle::Branch::Conditional);
        if (m_plan.guidance_scale != 1.0) {
            hooks.unconditional = std::make_shared<const HookPlan>(build(FeatureBundle::Branch::Unconditional));
        }
        return hooks;
    }
    HookPlan reference_hooks(int step, const InversionRecord& own) const;
    HookPlan follower_hooks(int step, const InversionRecord& own, const FeatureTrace& reference_inverted,
                            const FeatureBundle* reference_live) const;
    StepPrediction predict(int step, const Tensor& latent, const HookPlan& hooks, std::uint64_t seed_index,
                           const std::string& path_id);
    Tensor finalize_noise(int step, const PathState& path, Tensor eps) const;
    const FeatureBundle& read(const FeatureTrace& trace, TraceSource source, int step) const;
    void check_record(const InversionRecord& record) const;

    DenoiserBackend& m_backend;
    const NoiseSchedule& m_noise;
    EditPlan m_plan;
    TraceAccessLog* m_log;
    Conditioning m_cond;
    Conditioning m_uncond;
};

}  // namespace seqedit
