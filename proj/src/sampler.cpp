// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/sampler.hpp"

#include <algorithm>

#include "seqedit/mask.hpp"

namespace seqedit {

void TraceAccessLog::record(TraceSource source, int step) {
    std::lock_guard lock(m_mutex);
    m_reads.emplace_back(source, step);
}

std::size_t TraceAccessLog::reads(TraceSource source) const {
    std::lock_guard lock(m_mutex);
    return static_cast<std::size_t>(
        std::count_if(m_reads.begin(), m_reads.end(), [&](const auto& r) { return r.first == source; }));
}

std::size_t TraceAccessLog::reads_at_or_after(TraceSource source, int step) const {
    std::lock_guard lock(m_mutex);
    return static_cast<std::size_t>(std::count_if(
        m_reads.begin(), m_reads.end(), [&](const auto& r) { return r.first == source && r.second >= step; }));
}

void TraceAccessLog::clear() {
    std::lock_guard lock(m_mutex);
    m_reads.clear();
}

PathState PathState::start(const InversionRecord& record, const Mask* mask, std::uint64_t seed_index) {
    PathState p;
    p.record = &record;
    p.mask = mask;
    p.seed_index = seed_index;
    p.latent = record.terminal();
    return p;
}

const FeatureBundle& PathState::live_at(int step) const {
    SEQEDIT_CHECK(step >= 0 && static_cast<std::size_t>(step) < live.size(), Range, "path '",
                  record ? record->image_id : std::string(), "' has no live features for step ", step);
    return live[static_cast<std::size_t>(step)];
}

EditTrace PathState::finish() const {
    return {FeatureTrace(TraceOrigin::Edit, record->image_id, live), latent, record->total_steps};
}

namespace {

const AttentionFeatures& attention_at(const FeatureBundle& bundle, int layer) {
    auto it = bundle.attention.find(layer);
    SEQEDIT_CHECK(it != bundle.attention.end(), Validation, "features of '", bundle.path_id, "' at step ",
                  bundle.step_index, " lack attention layer ", layer);
    return it->second;
}

const TensorRef& resnet_at(const FeatureBundle& bundle, int layer) {
    auto it = bundle.resnet.find(layer);
    SEQEDIT_CHECK(it != bundle.resnet.end() && it->second, Validation, "features of '", bundle.path_id,
                  "' at step ", bundle.step_index, " lack resnet layer ", layer);
    return it->second;
}

void set_if(TensorRef& slot, bool enabled, const TensorRef& value) {
    if (enabled) slot = value;
}

void prune_empty(HookPlan& hooks) {
    for (auto it = hooks.attention_overrides.begin(); it != hooks.attention_overrides.end();) {
        const auto& o = it->second;
        it = (!o.q && !o.k && !o.v) ? hooks.attention_overrides.erase(it) : std::next(it);
    }
}

}  // namespace

UnifiedSampler::UnifiedSampler(DenoiserBackend& backend, const NoiseSchedule& noise, EditPlan plan,
                               TraceAccessLog* access_log)
    : m_backend(backend), m_noise(noise), m_plan(std::move(plan)), m_log(access_log) {
    validate_schedule(m_plan.schedule);
    SEQEDIT_CHECK(m_plan.schedule.total_steps == noise.steps(), Validation, "schedule T=",
                  m_plan.schedule.total_steps, " does not match noise schedule T=", noise.steps());
    SEQEDIT_CHECK(m_plan.layers.is_normalized(), Validation, "layer lists must be sorted and duplicate-free");
    m_cond = backend.encode_text(m_plan.target_prompt);
    m_uncond = backend.encode_text("");
}

const FeatureBundle& UnifiedSampler::read(const FeatureTrace& trace, TraceSource source, int step) const {
    if (m_log) m_log->record(source, step);
    return trace.at(step);
}

void UnifiedSampler::check_record(const InversionRecord& record) const {
    record.validate();
    SEQEDIT_CHECK(record.total_steps == m_noise.steps(), Validation, "record of '", record.image_id, "' has T=",
                  record.total_steps, ", sampler runs T=", m_noise.steps());
    if (m_plan.schedule.s_edit == 0) return;
    for (int l : m_plan.layers.attention_layers) {
        SEQEDIT_CHECK(record.layers.has_attention(l), Validation, "record of '", record.image_id,
                      "' did not capture attention layer ", l);
    }
    for (int l : m_plan.layers.resnet_layers) {
        SEQEDIT_CHECK(record.layers.has_resnet(l), Validation, "record of '", record.image_id,
                      "' did not capture resnet layer ", l);
    }
}

HookPlan UnifiedSampler::reference_hooks(int step, const InversionRecord& own) const {
    const auto& sched = m_plan.schedule;
    if (classify_phase(step, sched) != Phase::FullInjection) return {};
    if (!(sched.inject_q || sched.inject_k || sched.inject_f)) return {};

    const FeatureBundle& inverted = read(own.trace, TraceSource::OwnInverted, step);
    return per_branch([&](FeatureBundle::Branch b) {
        const FeatureBundle& src_bundle = inverted.branch(b);
        HookPlan hooks;
        for (int l : m_plan.layers.attention_layers) {
            const auto& src = attention_at(src_bundle, l);
            AttentionOverride o;
            set_if(o.q, sched.inject_q, src.q);
            set_if(o.k, sched.inject_k, src.k);
            hooks.attention_overrides[l] = o;
        }
        if (sched.inject_f) {
            for (int l : m_plan.layers.resnet_layers) hooks.resnet_overrides[l] = resnet_at(src_bundle, l);
        }
        prune_empty(hooks);
        return hooks;
    });
}

HookPlan UnifiedSampler::follower_hooks(int step, const InversionRecord& own, const FeatureTrace& reference_inverted,
                                        const FeatureBundle* reference_live) const {
    const auto& sched = m_plan.schedule;
    const Phase phase = classify_phase(step, sched);
    if (phase == Phase::Vanilla) return {};

    auto live = [&]() -> const FeatureBundle& {
        SEQEDIT_CHECK(reference_live != nullptr, Validation, "follower '", own.image_id, "' at step ", step,
                      " needs the reference's live features");
        SEQEDIT_CHECK(reference_live->step_index == step, Validation, "follower '", own.image_id, "' at step ", step,
                      " was handed reference features of step ", reference_live->step_index);
        if (m_log) m_log->record(TraceSource::ReferenceLive, step);
        return *reference_live;
    };

    if (phase == Phase::FullInjection) {
        const bool value_live = sched.inject_v && m_plan.follower_value == ValueSource::Live;
        const bool value_inverted = sched.inject_v && m_plan.follower_value == ValueSource::Inverted;
        const FeatureBundle* own_inv = sched.inject_q ? &read(own.trace, TraceSource::OwnInverted, step) : nullptr;
        const FeatureBundle* ref_inv = (sched.inject_k || sched.inject_f || value_inverted)
                                           ? &read(reference_inverted, TraceSource::ReferenceInverted, step)
                                           : nullptr;
        const FeatureBundle* ref_live = value_live ? &live() : nullptr;

        return per_branch([&](FeatureBundle::Branch b) {
            HookPlan hooks;
            for (int l : m_plan.layers.attention_layers) {
                AttentionOverride o;
                if (own_inv) o.q = attention_at(own_inv->branch(b), l).q;
                if (sched.inject_k) o.k = attention_at(ref_inv->branch(b), l).k;
                if (value_live) o.v = attention_at(ref_live->branch(b), l).v;
                if (value_inverted) o.v = attention_at(ref_inv->branch(b), l).v;
                hooks.attention_overrides[l] = o;
            }
            if (sched.inject_f) {
                for (int l : m_plan.layers.resnet_layers) hooks.resnet_overrides[l] = resnet_at(ref_inv->branch(b), l);
            }
            prune_empty(hooks);
            return hooks;
        });
    }

    if (!(sched.inject_k || sched.inject_v || sched.inject_f)) return {};
    const FeatureBundle& ref_live = live();
    return per_branch([&](FeatureBundle::Branch b) {
        const FeatureBundle& src_bundle = ref_live.branch(b);
        HookPlan hooks;
        for (int l : m_plan.layers.attention_layers) {
            const auto& src = attention_at(src_bundle, l);
            AttentionOverride o;
            set_if(o.k, sched.inject_k, src.k);
            set_if(o.v, sched.inject_v, src.v);
            hooks.attention_overrides[l] = o;
        }
        if (sched.inject_f) {
            for (int l : m_plan.layers.resnet_layers) hooks.resnet_overrides[l] = resnet_at(src_bundle, l);
        }
        prune_empty(hooks);
        return hooks;
    });
}

StepPrediction UnifiedSampler::predict(int step, const Tensor& latent, const HookPlan& hooks,
                                       std::uint64_t seed_index, const std::string& path_id) {
    HookPlan plan = hooks;
    const bool record = step < m_plan.schedule.s_context;
    if (record) plan.capture = m_plan.layers;
    NoisePrediction pred =
        guided_noise(m_backend, latent, m_noise.timestep_of_step(step), m_cond, m_uncond, m_plan.guidance_scale, plan,
                     derive_seed(m_plan.seed, seed_index, static_cast<std::uint64_t>(step)));
    StepPrediction out;
    out.eps = std::move(pred.eps);
    if (record) {
        auto strip = [&](FeatureBundle& bundle) {
            bundle.step_index = step;
            bundle.path_id = path_id;
            for (auto& [layer, feats] : bundle.attention) feats.q.reset();
        };
        out.live = std::move(pred.captured);
        strip(out.live);
        if (out.live.unconditional) {
            FeatureBundle uncond = *out.live.unconditional;
            strip(uncond);
            out.live.unconditional = std::make_shared<const FeatureBundle>(std::move(uncond));
        }
    }
    return out;
}

StepPrediction UnifiedSampler::predict_reference(int step, const Tensor& latent, const InversionRecord& own,
                                                 std::uint64_t seed_index) {
    return predict(step, latent, reference_hooks(step, own), seed_index, own.image_id);
}

StepPrediction UnifiedSampler::predict_follower(int step, const Tensor& latent, const InversionRecord& own,
                                                const FeatureTrace& reference_inverted,
                                                const FeatureBundle* reference_live, std::uint64_t seed_index) {
    return predict(step, latent, follower_hooks(step, own, reference_inverted, reference_live), seed_index,
                   own.image_id);
}

Tensor UnifiedSampler::advance(int step, const Tensor& latent, const Tensor& eps) const {
    const int level = m_noise.level_of_step(step);
    return ddim_reverse_step(latent, eps, level, level - 1, m_noise);
}

Tensor UnifiedSampler::finalize_noise(int step, const PathState& path, Tensor eps) const {
    if (!path.mask) return eps;
    return blend_masked_noise(eps, path.record->eps_inv.at(static_cast<std::size_t>(step)), *path.mask);
}

void UnifiedSampler::step_reference(PathState& ref) {
    SEQEDIT_CHECK(ref.record && !ref.done(), Validation, "reference path has no steps left");
    const int s = ref.next_step;
    auto pred = predict_reference(s, ref.latent, *ref.record, ref.seed_index);
    ref.latent = advance(s, ref.latent, finalize_noise(s, ref, std::move(pred.eps)));
    if (s < m_plan.schedule.s_context) ref.live.push_back(std::move(pred.live));
    ++ref.next_step;
}

void UnifiedSampler::step_follower(PathState& follower, const FeatureTrace& reference_inverted,
                                   const FeatureBundle* reference_live) {
    SEQEDIT_CHECK(follower.record && !follower.done(), Validation, "follower path has no steps left");
    const int s = follower.next_step;
    auto pred = predict_follower(s, follower.latent, *follower.record, reference_inverted, reference_live,
                                 follower.seed_index);
    follower.latent = advance(s, follower.latent, finalize_noise(s, follower, std::move(pred.eps)));
    if (s < m_plan.schedule.s_context) follower.live.push_back(std::move(pred.live));
    ++follower.next_step;
}

void UnifiedSampler::step_follower_after(PathState& follower, const PathState& ref) {
    const int s = follower.next_step;
    SEQEDIT_CHECK(ref.next_step == s + 1, Validation, "follower step ", s,
                  " must run right after the reference finished step ", s, " (reference is at step ", ref.next_step,
                  ")");
    const FeatureBundle* live = s < m_plan.schedule.s_context ? &ref.live_at(s) : nullptr;
    step_follower(follower, ref.record->trace, live);
}

void UnifiedSampler::step_pair(PathState& ref, PathState& follower) {
    SEQEDIT_CHECK(ref.next_step == follower.next_step, Validation, "lockstep paths disagree on the step (reference ",
                  ref.next_step, ", follower ", follower.next_step, ")");
    step_reference(ref);
    step_follower_after(follower, ref);
}

EditResult UnifiedSampler::edit_reference(const InversionRecord& record, const Mask* mask,
                                          std::uint64_t seed_index) {
    check_record(record);
    PathState path = PathState::start(record, mask, seed_index);
    while (!path.done()) step_reference(path);
    return {path.latent, path.finish()};
}

EditResult UnifiedSampler::edit_follower(const InversionRecord& record, const FeatureTrace& reference_inverted,
                                         const EditTrace& reference_edit, const Mask* mask,
                                         std::uint64_t seed_index) {
    check_record(record);
    const int s_context = m_plan.schedule.s_context;
    SEQEDIT_CHECK(reference_edit.features.size() >= static_cast<std::size_t>(s_context), Validation,
                  "reference edit trace covers ", reference_edit.features.size(), " steps, follower needs ",
                  s_context);
    if (m_plan.schedule.s_edit > 0) {
        SEQEDIT_CHECK(reference_inverted.size() == static_cast<std::size_t>(m_noise.steps()), Validation,
                      "reference inversion trace covers ", reference_inverted.size(), " of ", m_noise.steps(),
                      " steps");
    }
    PathState path = PathState::start(record, mask, seed_index);
    while (!path.done()) {
        const int s = path.next_step;
        const FeatureBundle* live = s < s_context ? &reference_edit.features.at(s) : nullptr;
        step_follower(path, reference_inverted, live);
    }
    return {path.latent, path.finish()};
}

}  // namespace seqedit
