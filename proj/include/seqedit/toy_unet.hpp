// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "seqedit/ddim.hpp"
#include "seqedit/denoiser.hpp"

namespace seqedit {

struct ToyUNetConfig {
    std::uint64_t seed = 1234;
    int base_channels = 16;
    int embedding_dim = 32;
    int groups = 4;
    /// The prediction is the Gaussian-prior denoiser
    ///   sqrt(1 - abar) / (abar * data_variance + 1 - abar) * z
    /// plus residual_gain * abar times the network output.
    double data_variance = 0.5;
    double residual_gain = 0.5;
    NoiseScheduleConfig schedule;
};

/// Small pixel-space U-Net used to exercise the sampler without foundation
/// model weights.
///
/// Three resolution levels (H, H/2, H/4). Each upsample block is a
/// group-normalized resnet block followed by a single-head self-attention
/// layer; block 0 runs at the lowest resolution. Layer indices equal the up
/// block index for both kinds, so the enumeration is
///   attention 0 (H/4), 1 (H/2), 2 (H) and resnet 0 (H/4), 1 (H/2), 2 (H).
/// Text is encoded by hashing words to seeded vectors.
class ToyUNet final : public DenoiserBackend {
public:
    explicit ToyUNet(ToyUNetConfig config = {});
    ~ToyUNet() override;
    ToyUNet(const ToyUNet&);
    ToyUNet& operator=(const ToyUNet&) = delete;

    std::string id() const override { return "toy"; }
    int latent_channels() const override { return 3; }
    int spatial_multiple() const override { return 4; }
    std::vector<LayerAddress> enumerate_layers(std::int64_t latent_height, std::int64_t latent_width) const override;
    LayerSet default_layers() const override;
    Conditioning encode_text(std::string_view text) const override;
    std::unique_ptr<DenoiserBackend> clone() const override;

    const ToyUNetConfig& config() const noexcept { return m_config; }

protected:
    NoisePrediction forward(const Tensor& latent, int timestep, const Conditioning& cond, const HookPlan& plan,
                            std::uint64_t seed) override;

private:
    struct Weights;
    ToyUNetConfig m_config;
    std::vector<double> m_train_alpha_bar;
    std::unique_ptr<Weights> m_weights;
};

}  // namespace seqedit
