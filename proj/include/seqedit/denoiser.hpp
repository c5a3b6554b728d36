// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "seqedit/core.hpp"
#include "seqedit/tensor.hpp"

namespace seqedit {

enum class LayerKind { Attention, Resnet };

std::string_view to_string(LayerKind kind);

/// One addressable layer of a backend's upsample path.
///
/// Attention layers expose token matrices of shape [token_count, channel_count];
/// resnet layers expose feature maps of shape [channel_count, height, width].
/// resolution_level is 0 at the lowest resolution and increases upward.
struct LayerAddress {
    int index = 0;
    LayerKind kind = LayerKind::Attention;
    int resolution_level = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t token_count = 0;
    std::int64_t channel_count = 0;

    Shape feature_shape() const;

    friend bool operator==(const LayerAddress&, const LayerAddress&) = default;
};

struct AttentionOverride {
    TensorRef q;
    TensorRef k;
    TensorRef v;
};

/// What to record and what to replace during one forward pass.
struct HookPlan {
    LayerSet capture;
    std::map<int, AttentionOverride> attention_overrides;
    std::map<int, TensorRef> resnet_overrides;
    /// Overrides for the unconditional guidance branch; null means that
    /// branch gets the overrides above. Capture settings are shared.
    std::shared_ptr<const HookPlan> unconditional;

    bool has_overrides() const;
};

/// Text conditioning produced by a backend's encoder.
struct Conditioning {
    std::string text;
    Tensor embedding;
};

struct NoisePrediction {
    Tensor eps;
    FeatureBundle captured;
};

/// Noise-prediction interface of a denoising U-Net with a feature hook bus.
///
/// Contract for adapters:
///  - latents are [latent_channels, H, W] with H and W multiples of
///    spatial_multiple();
///  - predict_noise receives the training-schedule timestep (0..999), not the
///    sampling step index;
///  - at an attention layer Q, K and V overrides replace the projected tensors
///    before the attention product; V is projected from the layer input when
///    not overridden;
///  - at a resnet layer an f override replaces the block output;
///  - captures are taken after overrides are applied;
///  - identical inputs must give bit-identical outputs.
///
/// An instance is not required to accept concurrent calls; use clone() to get
/// one instance per worker.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual std::string id() const = 0;
    virtual int latent_channels() const = 0;
    virtual int spatial_multiple() const = 0;
    virtual std::vector<LayerAddress> enumerate_layers(std::int64_t latent_height, std::int64_t latent_width) const = 0;
    virtual LayerSet default_layers() const = 0;
    virtual Conditioning encode_text(std::string_view text) const = 0;
    virtual std::unique_ptr<DenoiserBackend> clone() const = 0;

    /// Validates the latent and the hook plan against the layer enumeration,
    /// then runs the forward pass.
    NoisePrediction predict_noise(const Tensor& latent, int timestep, const Conditioning& cond, const HookPlan& plan,
                                  std::uint64_t seed = 0);

    /// Throws ErrorKind::Range for unknown layers and ErrorKind::Shape for
    /// override tensors that do not match the declared layer shapes.
    void validate_plan(const HookPlan& plan, std::int64_t latent_height, std::int64_t latent_width) const;
    void validate_layers(const LayerSet& layers, std::int64_t latent_height, std::int64_t latent_width) const;

protected:
    virtual NoisePrediction forward(const Tensor& latent, int timestep, const Conditioning& cond,
                                    const HookPlan& plan, std::uint64_t seed) = 0;
};

/// softmax(Q K^T / sqrt(head_dim)) V, row-wise. The output has Q's token count
/// whatever the source of K and V.
RowMatrix attention(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v, int head_dim);

/// Layer layout of the Stable Diffusion 2.x U-Net upsample path.
///
/// Indices count three slots per up block (index = 3 * block + position), for
/// resnets and attentions alike. Up block 0 has no attention, so attention
/// indices start at 3. The commonly injected layers are attention {4, 7, 9}
/// (up_blocks[1].attentions[1], up_blocks[2].attentions[1],
/// up_blocks[3].attentions[0]) and resnet 4 (up_blocks[1].resnets[1]).
std::vector<LayerAddress> stable_diffusion_upsample_layout(std::int64_t latent_height, std::int64_t latent_width);
LayerSet stable_diffusion_default_layers();

}  // namespace seqedit
