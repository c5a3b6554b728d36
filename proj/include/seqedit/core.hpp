// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "seqedit/error.hpp"
#include "seqedit/tensor.hpp"

namespace seqedit {

/// Layer indices (into a backend's enumeration) that take part in capture and
/// injection. Attention and resnet indices are separate namespaces.
struct LayerSet {
    std::vector<int> attention_layers;
    std::vector<int> resnet_layers;

    /// Sorts and de-duplicates both lists.
    LayerSet normalized() const;
    bool is_normalized() const;
    bool has_attention(int index) const;
    bool has_resnet(int index) const;

    friend bool operator==(const LayerSet&, const LayerSet&) = default;
};

enum class Phase { FullInjection, ContextOnly, Vanilla };

std::string_view to_string(Phase phase);

/// Sampling steps are counted ascending from the start of reverse sampling
/// (step 0 is the noisiest). Steps [0, s_edit) inject inverted features,
/// [s_edit, s_context) only share the reference's live context, the rest run
/// plain sampling.
struct InjectionSchedule {
    int total_steps = 50;
    int s_edit = 20;
    int s_context = 50;
    bool inject_f = true;
    bool inject_q = true;
    bool inject_k = true;
    bool inject_v = true;

    friend bool operator==(const InjectionSchedule&, const InjectionSchedule&) = default;
};

/// Throws ErrorKind::Validation naming the violated inequality.
void validate_schedule(const InjectionSchedule& sched);

/// Throws ErrorKind::Range when step is outside [0, T).
Phase classify_phase(int step, const InjectionSchedule& sched);

struct AttentionFeatures {
    TensorRef q;
    TensorRef k;
    TensorRef v;
};

/// Features of one path at one sampling step. A null TensorRef means the kind
/// was not recorded.
struct FeatureBundle {
    int step_index = 0;
    std::string path_id;
    std::map<int, AttentionFeatures> attention;
    std::map<int, TensorRef> resnet;
    /// Features of the unconditional guidance branch, when that branch ran
    /// with capture enabled. Overrides built from this bundle use it for the
    /// unconditional branch; without it both branches get the same tensors.
    std::shared_ptr<const FeatureBundle> unconditional;

    enum class Branch { Conditional, Unconditional };
    const FeatureBundle& branch(Branch b) const {
        return b == Branch::Unconditional && unconditional ? *unconditional : *this;
    }

    /// Throws ErrorKind::Shape if Q/K/V at a layer disagree in token count or dim.
    void validate() const;
};

enum class TraceOrigin { Inversion, Edit };

/// Per-step feature record of one path. Bundles are indexed by sampling step;
/// the trace is immutable once built.
class FeatureTrace {
public:
    FeatureTrace() = default;
    FeatureTrace(TraceOrigin origin, std::string source_image_id, std::vector<FeatureBundle> bundles);

    TraceOrigin origin() const noexcept { return m_origin; }
    const std::string& source_image_id() const noexcept { return m_source_image_id; }
    std::size_t size() const noexcept { return m_bundles.size(); }
    bool empty() const noexcept { return m_bundles.empty(); }

    const FeatureBundle& at(int step) const;
    const std::vector<FeatureBundle>& bundles() const noexcept { return m_bundles; }

private:
    TraceOrigin m_origin = TraceOrigin::Inversion;
    std::string m_source_image_id;
    std::vector<FeatureBundle> m_bundles;
};

/// Per-image scalar field in [0, 1] at latent resolution, laid out [H, W].
class Mask {
public:
    Mask() = default;
    /// Values are clamped to [0, 1].
    explicit Mask(Tensor field);

    static Mask constant(std::int64_t height, std::int64_t width, double value);

    const Tensor& field() const noexcept { return m_field; }
    std::int64_t height() const { return m_field.dim(0); }
    std::int64_t width() const { return m_field.dim(1); }
    double operator()(std::int64_t y, std::int64_t x) const { return m_field[static_cast<std::size_t>(y * width() + x)]; }

    Mask thresholded(double level = 0.5) const;

private:
    Tensor m_field;
};

struct FixedReference {
    int ref_index = 0;
};
struct ChainedReference {};
using ReferenceStrategy = std::variant<FixedReference, ChainedReference>;

/// Where a follower takes V from during the full-injection phase.
enum class ValueSource { Live, Inverted };

struct EditPlan {
    std::string target_prompt;
    std::string source_prompt;
    ReferenceStrategy reference_strategy = ChainedReference{};
    InjectionSchedule schedule;
    LayerSet layers;
    double guidance_scale = 7.5;
    std::uint64_t seed = 0;
    ValueSource follower_value = ValueSource::Live;
    std::vector<Mask> masks;  // empty, or one per image
    std::string backend_id = "toy";
    std::string codec_id = "identity";
};

/// Checks the schedule, the reference index against sequence_length and the
/// mask count.
void validate_plan(const EditPlan& plan, std::size_t sequence_length);

}  // namespace seqedit
