// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "seqedit/core.hpp"
#include "seqedit/denoiser.hpp"
#include "seqedit/tensor.hpp"

namespace seqedit {

class Codec;
struct Image;

struct NoiseScheduleConfig {
    int train_steps = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    int steps_offset = 1;
    bool set_alpha_to_one = true;
};

/// Scaled-linear beta schedule over the training steps, subsampled to the
/// inference step count with "leading" spacing.
///
/// Noise levels run 0..T. Level 0 is the clean sample; level j >= 1 sits at
/// training timestep (j - 1) * (train_steps / T) + steps_offset. Sampling step
/// s starts at level T - s and evaluates the denoiser at that level's
/// timestep.
class NoiseSchedule {
public:
    explicit NoiseSchedule(int inference_steps, NoiseScheduleConfig config = {});

    int steps() const noexcept { return m_steps; }
    const NoiseScheduleConfig& config() const noexcept { return m_config; }

    double alpha_bar(int level) const;
    int timestep(int level) const;
    double train_alpha_bar(int train_timestep) const;

    int level_of_step(int sampling_step) const { return m_steps - sampling_step; }
    int timestep_of_step(int sampling_step) const { return timestep(level_of_step(sampling_step)); }

private:
    int m_steps;
    NoiseScheduleConfig m_config;
    std::vector<double> m_train_alpha_bar;
    std::vector<double> m_level_alpha_bar;
    std::vector<int> m_level_timestep;
};

/// Deterministic DDIM update from level t down to level t_prev <= t.
Tensor ddim_reverse_step(const Tensor& z_t, const Tensor& eps, int t, int t_prev, const NoiseSchedule& sched);

/// Mirror of ddim_reverse_step toward higher noise (t_next >= t).
Tensor ddim_invert_step(const Tensor& z_t, const Tensor& eps, int t, int t_next, const NoiseSchedule& sched);

/// Classifier-free guided prediction. With guidance_scale == 1 only the
/// conditional branch runs. Otherwise the unconditional branch runs with
/// plan.unconditional (or the same overrides when that is null), and its
/// captures land in captured.unconditional.
NoisePrediction guided_noise(DenoiserBackend& backend, const Tensor& latent, int timestep, const Conditioning& cond,
                             const Conditioning& uncond, double guidance_scale, const HookPlan& plan,
                             std::uint64_t seed);

/// Latent trajectory, inversion noise and features of one image.
///
/// latents[j] is the latent at noise level j (latents[0] is the encoded
/// image, latents[T] the terminal z_T). eps_inv[s] and trace.at(s) are indexed
/// by the sampling step s they mirror: they come from the inversion step that
/// moved level T-1-s to level T-s, evaluated at the timestep sampling step s
/// uses.
struct InversionRecord {
    std::string image_id;
    std::string prompt;
    double guidance_scale = 1.0;
    LayerSet layers;
    int total_steps = 0;
    std::vector<Tensor> latents;
    std::vector<Tensor> eps_inv;
    FeatureTrace trace;

    const Tensor& terminal() const { return latents.back(); }
    const Tensor& source() const { return latents.front(); }
    /// Throws ErrorKind::Validation when the length invariants do not hold.
    void validate() const;
};

struct InversionOptions {
    std::string image_id = "image";
    std::string prompt;  // empty prompt by default
    double guidance_scale = 1.0;
    LayerSet layers;
    std::uint64_t seed = 0;
};

InversionRecord invert_latent(const Tensor& z0, const InversionOptions& options, const NoiseSchedule& sched,
                              DenoiserBackend& backend);

InversionRecord invert(const Image& image, const InversionOptions& options, const NoiseSchedule& sched,
                       DenoiserBackend& backend, const Codec& codec);

/// Plain DDIM sampling from a terminal latent, no hooks.
Tensor sample_vanilla(const Tensor& z_terminal, const std::string& prompt, double guidance_scale,
                      const NoiseSchedule& sched, DenoiserBackend& backend, std::uint64_t seed = 0);

/// Replays recorded inversion noise through reverse steps.
Tensor replay_inversion(const InversionRecord& record, const NoiseSchedule& sched);

/// Per-image, per-step sub-seeds derived from one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t image_index, std::uint64_t step);

}  // namespace seqedit
