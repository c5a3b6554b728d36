// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/ddim.hpp"

#include <cmath>

#include "seqedit/image.hpp"

namespace seqedit {

NoiseSchedule::NoiseSchedule(int inference_steps, NoiseScheduleConfig config)
    : m_steps(inference_steps), m_config(config) {
    SEQEDIT_CHECK(inference_steps >= 1, Validation, "noise schedule needs at least one inference step");
    SEQEDIT_CHECK(config.train_steps >= inference_steps, Validation, "inference steps (", inference_steps,
                  ") exceed training steps (", config.train_steps, ")");
    SEQEDIT_CHECK(config.beta_start > 0 && config.beta_end < 1 && config.beta_start <= config.beta_end, Validation,
                  "invalid beta range");

    const int n = config.train_steps;
    m_train_alpha_bar.resize(static_cast<std::size_t>(n));
    const double a = std::sqrt(config.beta_start);
    const double b = std::sqrt(config.beta_end);
    double prod = 1.0;
    for (int i = 0; i < n; ++i) {
        const double root = n == 1 ? a : a + (b - a) * i / (n - 1);
        prod *= 1.0 - root * root;
        m_train_alpha_bar[static_cast<std::size_t>(i)] = prod;
    }

    const int ratio = n / inference_steps;
    m_level_alpha_bar.resize(static_cast<std::size_t>(inference_steps) + 1);
    m_level_timestep.resize(static_cast<std::size_t>(inference_steps) + 1, -1);
    m_level_alpha_bar[0] = config.set_alpha_to_one ? 1.0 : m_train_alpha_bar[0];
    for (int j = 1; j <= inference_steps; ++j) {
        const int t = std::min((j - 1) * ratio + config.steps_offset, n - 1);
        m_level_timestep[static_cast<std::size_t>(j)] = t;
        m_level_alpha_bar[static_cast<std::size_t>(j)] = m_train_alpha_bar[static_cast<std::size_t>(t)];
    }
}

double NoiseSchedule::alpha_bar(int level) const {
    SEQEDIT_CHECK(level >= 0 && level <= m_steps, Range, "noise level ", level, " outside [0, ", m_steps, "]");
    return m_level_alpha_bar[static_cast<std::size_t>(level)];
}

int NoiseSchedule::timestep(int level) const {
    SEQEDIT_CHECK(level >= 1 && level <= m_steps, Range, "noise level ", level, " has no timestep (valid: 1..",
                  m_steps, ")");
    return m_level_timestep[static_cast<std::size_t>(level)];
}

double NoiseSchedule::train_alpha_bar(int train_timestep) const {
    SEQEDIT_CHECK(train_timestep >= 0 && train_timestep < m_config.train_steps, Range, "training timestep ",
                  train_timestep, " outside [0, ", m_config.train_steps, ")");
    return m_train_alpha_bar[static_cast<std::size_t>(train_timestep)];
}

namespace {

// z' = sqrt(a_to) * x0 + sqrt(1 - a_to) * eps, x0 = (z - sqrt(1 - a_from) * eps) / sqrt(a_from)
Tensor ddim_transfer(const Tensor& z, const Tensor& eps, double a_from, double a_to) {
    SEQEDIT_CHECK(z.same_shape(eps), Shape, "DDIM step: latent ", shape_to_string(z.shape()), " vs noise ",
                  shape_to_string(eps.shape()));
    SEQEDIT_CHECK(z.all_finite(), Numeric, "DDIM step: non-finite latent");
    SEQEDIT_CHECK(eps.all_finite(), Numeric, "DDIM step: non-finite noise");
    const double sa_from = std::sqrt(a_from);
    const double sb_from = std::sqrt(1.0 - a_from);
    const double sa_to = std::sqrt(a_to);
    const double sb_to = std::sqrt(1.0 - a_to);
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double x0 = (z[i] - sb_from * eps[i]) / sa_from;
        out[i] = sa_to * x0 + sb_to * eps[i];
    }
    return out;
}

}  // namespace

Tensor ddim_reverse_step(const Tensor& z_t, const Tensor& eps, int t, int t_prev, const NoiseSchedule& sched) {
    SEQEDIT_CHECK(t_prev <= t, Validation, "reverse step needs t_prev <= t (got ", t_prev, " > ", t, ")");
    if (t_prev == t) return z_t;
    return ddim_transfer(z_t, eps, sched.alpha_bar(t), sched.alpha_bar(t_prev));
}

Tensor ddim_invert_step(const Tensor& z_t, const Tensor& eps, int t, int t_next, const NoiseSchedule& sched) {
    SEQEDIT_CHECK(t_next >= t, Validation, "inversion step needs t_next >= t (got ", t_next, " < ", t, ")");
    if (t_next == t) return z_t;
    return ddim_transfer(z_t, eps, sched.alpha_bar(t), sched.alpha_bar(t_next));
}

NoisePrediction guided_noise(DenoiserBackend& backend, const Tensor& latent, int timestep, const Conditioning& cond,
                             const Conditioning& uncond, double guidance_scale, const HookPlan& plan,
                             std::uint64_t seed) {
    NoisePrediction conditional = backend.predict_noise(latent, timestep, cond, plan, seed);
    if (guidance_scale == 1.0) return conditional;

    HookPlan branch_plan = plan.unconditional ? *plan.unconditional : plan;
    branch_plan.unconditional.reset();
    branch_plan.capture = plan.capture;
    NoisePrediction unconditional = backend.predict_noise(latent, timestep, uncond, branch_plan, seed);
    if (!plan.capture.attention_layers.empty() || !plan.capture.resnet_layers.empty()) {
        conditional.captured.unconditional = std::make_shared<const FeatureBundle>(std::move(unconditional.captured));
    }
    for (std::size_t i = 0; i < conditional.eps.size(); ++i) {
        const double u = unconditional.eps[i];
        conditional.eps[i] = u + guidance_scale * (conditional.eps[i] - u);
    }
    return conditional;
}

void InversionRecord::validate() const {
    SEQEDIT_CHECK(total_steps >= 1, Validation, "inversion record of '", image_id, "' has no steps");
    SEQEDIT_CHECK(latents.size() == static_cast<std::size_t>(total_steps) + 1, Validation, "inversion record of '",
                  image_id, "' holds ", latents.size(), " latents for T=", total_steps);
    SEQEDIT_CHECK(eps_inv.size() == static_cast<std::size_t>(total_steps), Validation, "inversion record of '",
                  image_id, "' holds ", eps_inv.size(), " noise tensors for T=", total_steps);
    SEQEDIT_CHECK(trace.size() == static_cast<std::size_t>(total_steps), Validation, "inversion record of '",
                  image_id, "' holds ", trace.size(), " feature bundles for T=", total_steps);
}

InversionRecord invert_latent(const Tensor& z0, const InversionOptions& options, const NoiseSchedule& sched,
                              DenoiserBackend& backend) {
    const int steps = sched.steps();
    backend.validate_layers(options.layers, z0.dim(1), z0.dim(2));
    const Conditioning cond = backend.encode_text(options.prompt);
    const Conditioning uncond = backend.encode_text("");

    HookPlan plan;
    plan.capture = options.layers;

    InversionRecord rec;
    rec.image_id = options.image_id;
    rec.prompt = options.prompt;
    rec.guidance_scale = options.guidance_scale;
    rec.layers = options.layers;
    rec.total_steps = steps;
    rec.latents.reserve(static_cast<std::size_t>(steps) + 1);
    rec.latents.push_back(z0);

    std::vector<Tensor> eps_by_level(static_cast<std::size_t>(steps));
    std::vector<FeatureBundle> bundles(static_cast<std::size_t>(steps));
    for (int level = 0; level < steps; ++level) {
        const int step = steps - 1 - level;  // sampling step this inversion step mirrors
        NoisePrediction pred;
        try {
            pred = guided_noise(backend, rec.latents.back(), sched.timestep(level + 1), cond, uncond,
                                options.guidance_scale, plan, derive_seed(options.seed, 0, static_cast<std::uint64_t>(step)));
        } catch (const Error& e) {
            raise(e.kind(), "inverting '", options.image_id, "' at level ", level, ": ", e.what());
        }
        rec.latents.push_back(ddim_invert_step(rec.latents.back(), pred.eps, level, level + 1, sched));
        pred.captured.step_index = step;
        pred.captured.path_id = options.image_id;
        bundles[static_cast<std::size_t>(step)] = std::move(pred.captured);
        eps_by_level[static_cast<std::size_t>(step)] = std::move(pred.eps);
    }
    rec.eps_inv = std::move(eps_by_level);
    rec.trace = FeatureTrace(TraceOrigin::Inversion, options.image_id, std::move(bundles));
    return rec;
}

InversionRecord invert(const Image& image, const InversionOptions& options, const NoiseSchedule& sched,
                       DenoiserBackend& backend, const Codec& codec) {
    Tensor z0;
    try {
        z0 = codec.encode(image);
    } catch (const Error& e) {
        raise(e.kind(), "encoding '", options.image_id, "': ", e.what());
    }
    return invert_latent(z0, options, sched, backend);
}

Tensor sample_vanilla(const Tensor& z_terminal, const std::string& prompt, double guidance_scale,
                      const NoiseSchedule& sched, DenoiserBackend& backend, std::uint64_t seed) {
    const Conditioning cond = backend.encode_text(prompt);
    const Conditioning uncond = backend.encode_text("");
    const HookPlan empty;
    Tensor z = z_terminal;
    for (int s = 0; s < sched.steps(); ++s) {
        const int level = sched.level_of_step(s);
        const auto pred = guided_noise(backend, z, sched.timestep(level), cond, uncond, guidance_scale, empty,
                                       derive_seed(seed, 0, static_cast<std::uint64_t>(s)));
        z = ddim_reverse_step(z, pred.eps, level, level - 1, sched);
    }
    return z;
}

Tensor replay_inversion(const InversionRecord& record, const NoiseSchedule& sched) {
    record.validate();
    Tensor z = record.terminal();
    for (int s = 0; s < sched.steps(); ++s) {
        const int level = sched.level_of_step(s);
        z = ddim_reverse_step(z, record.eps_inv[static_cast<std::size_t>(s)], level, level - 1, sched);
    }
    return z;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t image_index, std::uint64_t step) {
    // splitmix64 finalizer over a mixed key
    std::uint64_t x = master ^ (image_index * 0x9E3779B97F4A7C15ull) ^ (step * 0xC2B2AE3D27D4EB4Full);
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace seqedit
