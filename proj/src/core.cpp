// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/core.hpp"

#include <algorithm>
#include <cmath>

namespace seqedit {

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

bool strictly_increasing(const std::vector<int>& v) {
    return std::adjacent_find(v.begin(), v.end(), [](int a, int b) { return a >= b; }) == v.end();
}

}  // namespace

LayerSet LayerSet::normalized() const {
    return {sorted_unique(attention_layers), sorted_unique(resnet_layers)};
}

bool LayerSet::is_normalized() const {
    return strictly_increasing(attention_layers) && strictly_increasing(resnet_layers);
}

bool LayerSet::has_attention(int index) const {
    return std::find(attention_layers.begin(), attention_layers.end(), index) != attention_layers.end();
}

bool LayerSet::has_resnet(int index) const {
    return std::find(resnet_layers.begin(), resnet_layers.end(), index) != resnet_layers.end();
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::FullInjection: return "full-injection";
        case Phase::ContextOnly: return "context-only";
        case Phase::Vanilla: return "vanilla";
    }
    return "unknown";
}

void validate_schedule(const InjectionSchedule& sched) {
    SEQEDIT_CHECK(sched.total_steps >= 1, Validation, "schedule requires T >= 1 (got T=", sched.total_steps, ")");
    SEQEDIT_CHECK(sched.s_edit >= 0, Validation, "schedule requires 0 <= s_edit (got s_edit=", sched.s_edit, ")");
    SEQEDIT_CHECK(sched.s_edit <= sched.s_context, Validation, "schedule requires s_edit <= s_context (got s_edit=",
                  sched.s_edit, " > s_context=", sched.s_context, ")");
    SEQEDIT_CHECK(sched.s_context <= sched.total_steps, Validation,
                  "schedule requires s_context <= T (got s_context=", sched.s_context, " > T=", sched.total_steps, ")");
}

Phase classify_phase(int step, const InjectionSchedule& sched) {
    SEQEDIT_CHECK(step >= 0 && step < sched.total_steps, Range, "step ", step, " outside [0, ", sched.total_steps,
                  ")");
    if (step < sched.s_edit) return Phase::FullInjection;
    if (step < sched.s_context) return Phase::ContextOnly;
    return Phase::Vanilla;
}

void FeatureBundle::validate() const {
    for (const auto& [layer, feats] : attention) {
        const Tensor* ref = nullptr;
        for (const auto& t : {feats.q, feats.k, feats.v}) {
            if (!t) continue;
            SEQEDIT_CHECK(t->rank() == 2, Shape, "attention layer ", layer, " feature is not a token matrix");
            if (!ref) {
                ref = t.get();
                continue;
            }
            SEQEDIT_CHECK(t->shape() == ref->shape(), Shape, "attention layer ", layer, ": Q/K/V shapes disagree (",
                          shape_to_string(t->shape()), " vs ", shape_to_string(ref->shape()), ")");
        }
    }
}

FeatureTrace::FeatureTrace(TraceOrigin origin, std::string source_image_id, std::vector<FeatureBundle> bundles)
    : m_origin(origin), m_source_image_id(std::move(source_image_id)), m_bundles(std::move(bundles)) {
    for (std::size_t i = 0; i < m_bundles.size(); ++i) {
        SEQEDIT_CHECK(m_bundles[i].step_index == static_cast<int>(i), Validation, "trace bundle ", i,
                      " carries step index ", m_bundles[i].step_index);
    }
}

const FeatureBundle& FeatureTrace::at(int step) const {
    SEQEDIT_CHECK(step >= 0 && static_cast<std::size_t>(step) < m_bundles.size(), Range, "trace of '",
                  m_source_image_id, "' has no step ", step, " (", m_bundles.size(), " recorded)");
    return m_bundles[static_cast<std::size_t>(step)];
}

Mask::Mask(Tensor field) : m_field(std::move(field)) {
    SEQEDIT_CHECK(m_field.rank() == 2, Shape, "mask must be [H, W], got ", shape_to_string(m_field.shape()));
    for (auto& v : m_field.values()) {
        SEQEDIT_CHECK(!std::isnan(v), Numeric, "mask contains NaN");
        v = std::clamp(v, 0.0, 1.0);
    }
}

Mask Mask::constant(std::int64_t height, std::int64_t width, double value) {
    return Mask(Tensor({height, width}, value));
}

Mask Mask::thresholded(double level) const {
    Tensor t = m_field;
    for (auto& v : t.values()) v = v >= level ? 1.0 : 0.0;
    return Mask(std::move(t));
}

void validate_plan(const EditPlan& plan, std::size_t sequence_length) {
    validate_schedule(plan.schedule);
    SEQEDIT_CHECK(plan.layers.is_normalized(), Validation, "layer lists must be sorted and duplicate-free");
    SEQEDIT_CHECK(sequence_length >= 1, Validation, "edit plan needs at least one image");
    if (const auto* fixed = std::get_if<FixedReference>(&plan.reference_strategy)) {
        SEQEDIT_CHECK(fixed->ref_index >= 0 && static_cast<std::size_t>(fixed->ref_index) < sequence_length, Range,
                      "reference index ", fixed->ref_index, " outside sequence of ", sequence_length, " images");
    }
    SEQEDIT_CHECK(plan.masks.empty() || plan.masks.size() == sequence_length, Validation, "plan carries ",
                  plan.masks.size(), " masks for ", sequence_length, " images");
    SEQEDIT_CHECK(std::isfinite(plan.guidance_scale), Validation, "guidance scale must be finite");
}

}  // namespace seqedit
