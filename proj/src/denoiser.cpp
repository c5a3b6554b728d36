// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/denoiser.hpp"

#include <cmath>

namespace seqedit {

std::string_view to_string(LayerKind kind) {
    return kind == LayerKind::Attention ? "attention" : "resnet";
}

Shape LayerAddress::feature_shape() const {
    if (kind == LayerKind::Attention) return {token_count, channel_count};
    return {channel_count, height, width};
}

bool HookPlan::has_overrides() const {
    return !attention_overrides.empty() || !resnet_overrides.empty();
}

namespace {

const LayerAddress* find_layer(const std::vector<LayerAddress>& layers, LayerKind kind, int index) {
    for (const auto& l : layers) {
        if (l.kind == kind && l.index == index) return &l;
    }
    return nullptr;
}

const LayerAddress& require_layer(const std::vector<LayerAddress>& layers, LayerKind kind, int index) {
    const auto* l = find_layer(layers, kind, index);
    SEQEDIT_CHECK(l != nullptr, Range, "no ", to_string(kind), " layer with index ", index,
                  " in the backend enumeration");
    return *l;
}

void check_override(const TensorRef& t, const LayerAddress& layer, std::string_view what) {
    if (!t) return;
    SEQEDIT_CHECK(t->shape() == layer.feature_shape(), Shape, what, " override at ", to_string(layer.kind),
                  " layer ", layer.index, " has shape ", shape_to_string(t->shape()), ", layer declares ",
                  shape_to_string(layer.feature_shape()));
}

}  // namespace

void DenoiserBackend::validate_layers(const LayerSet& layers, std::int64_t latent_height,
                                      std::int64_t latent_width) const {
    const auto all = enumerate_layers(latent_height, latent_width);
    for (int i : layers.attention_layers) require_layer(all, LayerKind::Attention, i);
    for (int i : layers.resnet_layers) require_layer(all, LayerKind::Resnet, i);
}

void DenoiserBackend::validate_plan(const HookPlan& plan, std::int64_t latent_height,
                                    std::int64_t latent_width) const {
    const auto all = enumerate_layers(latent_height, latent_width);
    for (int i : plan.capture.attention_layers) require_layer(all, LayerKind::Attention, i);
    for (int i : plan.capture.resnet_layers) require_layer(all, LayerKind::Resnet, i);
    for (const auto& [i, o] : plan.attention_overrides) {
        const auto& layer = require_layer(all, LayerKind::Attention, i);
        check_override(o.q, layer, "Q");
        check_override(o.k, layer, "K");
        check_override(o.v, layer, "V");
    }
    for (const auto& [i, f] : plan.resnet_overrides) check_override(f, require_layer(all, LayerKind::Resnet, i), "f");
}

NoisePrediction DenoiserBackend::predict_noise(const Tensor& latent, int timestep, const Conditioning& cond,
                                               const HookPlan& plan, std::uint64_t seed) {
    SEQEDIT_CHECK(latent.rank() == 3 && latent.dim(0) == latent_channels(), Shape, "backend '", id(),
                  "' expects a [", latent_channels(), ", H, W] latent, got ", shape_to_string(latent.shape()));
    const auto mult = spatial_multiple();
    SEQEDIT_CHECK(latent.dim(1) % mult == 0 && latent.dim(2) % mult == 0, Shape, "latent spatial size ",
                  latent.dim(1), "x", latent.dim(2), " is not a multiple of ", mult);
    SEQEDIT_CHECK(latent.all_finite(), Numeric, "non-finite latent passed to backend '", id(), "'");
    validate_plan(plan, latent.dim(1), latent.dim(2));
    return forward(latent, timestep, cond, plan, seed);
}

RowMatrix attention(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v, int head_dim) {
    SEQEDIT_CHECK(head_dim > 0, Shape, "attention head dimension must be positive");
    SEQEDIT_CHECK(q.cols() == k.cols(), Shape, "attention: Q dim ", q.cols(), " != K dim ", k.cols());
    SEQEDIT_CHECK(k.rows() == v.rows(), Shape, "attention: K has ", k.rows(), " tokens, V has ", v.rows());
    SEQEDIT_CHECK(q.cols() == head_dim, Shape, "attention: head_dim ", head_dim, " != feature dim ", q.cols());

    RowMatrix logits = (q * k.transpose()) / std::sqrt(static_cast<double>(head_dim));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        const double m = row.maxCoeff();
        row = (row.array() - m).exp();
        row /= row.sum();
    }
    return logits * v;
}

std::vector<LayerAddress> stable_diffusion_upsample_layout(std::int64_t latent_height, std::int64_t latent_width) {
    SEQEDIT_CHECK(latent_height % 8 == 0 && latent_width % 8 == 0, Shape,
                  "Stable Diffusion latents must be multiples of 8, got ", latent_height, "x", latent_width);
    // up block b runs at latent / 2^(3 - b) with these channel widths.
    constexpr std::int64_t channels[4] = {1280, 1280, 640, 320};
    std::vector<LayerAddress> out;
    for (int block = 0; block < 4; ++block) {
        const std::int64_t h = latent_height >> (3 - block);
        const std::int64_t w = latent_width >> (3 - block);
        for (int pos = 0; pos < 3; ++pos) {
            out.push_back({3 * block + pos, LayerKind::Resnet, block, h, w, h * w, channels[block]});
        }
        if (block == 0) continue;
        for (int pos = 0; pos < 3; ++pos) {
            out.push_back({3 * block + pos, LayerKind::Attention, block, h, w, h * w, channels[block]});
        }
    }
    return out;
}

LayerSet stable_diffusion_default_layers() {
    return {{4, 7, 9}, {4}};
}

}  // namespace seqedit
