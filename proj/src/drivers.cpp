// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/drivers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "seqedit/mask.hpp"

namespace seqedit {

namespace {

std::vector<std::int64_t> axis_offsets(std::int64_t length, std::int64_t window, std::int64_t stride, bool& snapped) {
    std::vector<std::int64_t> out;
    std::int64_t off = 0;
    while (true) {
        out.push_back(off);
        if (off + window >= length) break;
        off += stride;
        if (off + window > length) {
            off = length - window;
            snapped = true;
            out.push_back(off);
            break;
        }
    }
    return out;
}

}  // namespace

CropPlan make_crop_plan(std::int64_t height, std::int64_t width, std::int64_t window, std::int64_t stride) {
    SEQEDIT_CHECK(window > 0 && stride > 0, Validation, "crop window and stride must be positive");
    SEQEDIT_CHECK(window <= width && window <= height, Validation, "crop window ", window, " exceeds canvas ",
                  height, "x", width);
    SEQEDIT_CHECK(stride <= window, Validation, "stride ", stride, " larger than window ", window,
                  " would leave gaps");

    CropPlan plan;
    plan.height = height;
    plan.width = width;
    plan.window = window;
    plan.stride = stride;
    const auto ys = axis_offsets(height, window, stride, plan.snapped);
    const auto xs = axis_offsets(width, window, stride, plan.snapped);
    for (auto y : ys)
        for (auto x : xs) plan.offsets.push_back({y, x});

    plan.coverage.assign(static_cast<std::size_t>(height * width), 0);
    for (const auto& o : plan.offsets)
        for (std::int64_t y = o.y; y < o.y + window; ++y)
            for (std::int64_t x = o.x; x < o.x + window; ++x) ++plan.coverage[static_cast<std::size_t>(y * width + x)];
    return plan;
}

Tensor slice_window(const Tensor& canvas, const WindowOffset& offset, std::int64_t window) {
    SEQEDIT_CHECK(canvas.rank() == 3, Shape, "slice_window expects [C, H, W]");
    const auto c = canvas.dim(0);
    SEQEDIT_CHECK(offset.y >= 0 && offset.x >= 0 && offset.y + window <= canvas.dim(1) &&
                      offset.x + window <= canvas.dim(2),
                  Range, "window at (", offset.y, ", ", offset.x, ") size ", window, " leaves canvas ",
                  shape_to_string(canvas.shape()));
    Tensor out({c, window, window});
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < window; ++y)
            for (std::int64_t x = 0; x < window; ++x) out.at(ch, y, x) = canvas.at(ch, offset.y + y, offset.x + x);
    return out;
}

Tensor scatter_average(const std::vector<Tensor>& per_window, const CropPlan& plan) {
    SEQEDIT_CHECK(per_window.size() == plan.offsets.size(), Validation, "scatter_average got ", per_window.size(),
                  " predictions for ", plan.offsets.size(), " windows");
    SEQEDIT_CHECK(!per_window.empty(), Validation, "scatter_average needs at least one window");
    const auto c = per_window.front().dim(0);
    Tensor canvas({c, plan.height, plan.width}, 0.0);
    for (std::size_t i = 0; i < per_window.size(); ++i) {
        const auto& pred = per_window[i];
        SEQEDIT_CHECK(pred.shape() == Shape({c, plan.window, plan.window}), Shape, "window ", i, " prediction has shape ",
                      shape_to_string(pred.shape()), ", expected ", shape_to_string({c, plan.window, plan.window}));
        const auto& o = plan.offsets[i];
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t y = 0; y < plan.window; ++y)
                for (std::int64_t x = 0; x < plan.window; ++x) canvas.at(ch, o.y + y, o.x + x) += pred.at(ch, y, x);
    }
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < plan.height; ++y)
            for (std::int64_t x = 0; x < plan.width; ++x) canvas.at(ch, y, x) /= plan.coverage_at(y, x);
    return canvas;
}

std::vector<std::size_t> subsample_uniform(std::size_t total, std::size_t budget) {
    std::vector<std::size_t> out;
    if (budget == 0 || budget >= total) {
        for (std::size_t i = 0; i < total; ++i) out.push_back(i);
        return out;
    }
    if (budget == 1) return {0};
    for (std::size_t i = 0; i < budget; ++i) {
        out.push_back(static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(total - 1) / static_cast<double>(budget - 1))));
    }
    return out;
}

namespace {

const Mask* mask_for(const EditPlan& plan, std::size_t index) {
    return plan.masks.empty() ? nullptr : &plan.masks[index];
}

InversionOptions inversion_options(const std::string& id, std::size_t index, const EditPlan& plan,
                                   const SequenceContext& ctx) {
    InversionOptions o;
    o.image_id = id;
    o.prompt = ctx.inversion.prompt;
    o.guidance_scale = ctx.inversion.guidance_scale;
    o.layers = plan.layers;
    o.seed = derive_seed(plan.seed, index, 0xFFFF'FFFFull);
    return o;
}

std::string image_id(std::size_t index) {
    return "image_" + std::to_string(index);
}

}  // namespace

InversionRecord invert_for_plan(const Image& image, const std::string& id, std::size_t index, const EditPlan& plan,
                                const SequenceContext& ctx) {
    try {
        return invert(image, inversion_options(id, index, plan, ctx), ctx.noise, ctx.backend, ctx.codec);
    } catch (const Error& e) {
        raise(e.kind(), "image ", index, " ('", id, "'): ", e.what());
    }
}

ChainedEditor::ChainedEditor(const SequenceContext& ctx, EditPlan plan)
    : m_ctx(ctx), m_plan(std::move(plan)), m_sampler(ctx.backend, ctx.noise, m_plan, ctx.access_log) {}

ChainedEditor::Step ChainedEditor::edit_next(const Image& frame, const std::string& frame_id) {
    return edit_next(invert_for_plan(frame, frame_id, m_done, m_plan, m_ctx));
}

ChainedEditor::Step ChainedEditor::edit_next(const InversionRecord& record) {
    const Mask* mask = mask_for(m_plan, m_done);
    EditResult result = m_prev_record
                             ? m_sampler.edit_follower(record, m_prev_record->trace, *m_prev_trace, mask, m_done)
                             : m_sampler.edit_reference(record, mask, m_done);
    Step step{m_ctx.codec.decode(result.latent), result.latent};
    m_prev_record = record;
    m_prev_trace = std::move(result.trace);
    ++m_done;
    return step;
}

void ChainedEditor::resume(InversionRecord predecessor_record, EditTrace predecessor_trace, std::size_t frames_done) {
    SEQEDIT_CHECK(frames_done >= 1, Validation, "resume needs at least one completed frame");
    m_prev_record = std::move(predecessor_record);
    m_prev_trace = std::move(predecessor_trace);
    m_done = frames_done;
}

SequenceResult edit_video(const std::vector<Image>& frames, const EditPlan& plan, const SequenceContext& ctx) {
    SEQEDIT_CHECK(!frames.empty(), Validation, "video editing needs at least one frame");
    SEQEDIT_CHECK(std::holds_alternative<ChainedReference>(plan.reference_strategy), Validation,
                  "video editing uses chained referencing");
    validate_plan(plan, frames.size());
    ChainedEditor editor(ctx, plan);
    SequenceResult out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto step = editor.edit_next(frames[i], "frame_" + std::to_string(i));
        out.images.push_back(std::move(step.image));
        out.latents.push_back(std::move(step.latent));
    }
    return out;
}

SequenceResult edit_multiview(const std::vector<Image>& images, const EditPlan& plan, const SequenceContext& ctx,
                              const MultiviewOptions& options) {
    SEQEDIT_CHECK(!images.empty(), Validation, "multiview editing needs at least one image");
    const auto* fixed = std::get_if<FixedReference>(&plan.reference_strategy);
    SEQEDIT_CHECK(fixed != nullptr, Validation, "multiview editing uses a fixed reference");
    validate_plan(plan, images.size());
    const auto ref = static_cast<std::size_t>(fixed->ref_index);

    SequenceResult out;
    out.images.resize(images.size());
    out.latents.resize(images.size());

    UnifiedSampler ref_sampler(ctx.backend, ctx.noise, plan, ctx.access_log);
    const InversionRecord ref_record = invert_for_plan(images[ref], image_id(ref), ref, plan, ctx);
    const EditResult ref_result = ref_sampler.edit_reference(ref_record, mask_for(plan, ref), ref);
    out.latents[ref] = ref_result.latent;
    out.images[ref] = ctx.codec.decode(ref_result.latent);

    std::vector<std::size_t> order = options.follower_order;
    if (order.empty()) {
        for (std::size_t i = 0; i < images.size(); ++i)
            if (i != ref) order.push_back(i);
    }
    for (auto i : order) {
        SEQEDIT_CHECK(i < images.size() && i != ref, Range, "follower index ", i, " is not a follower");
    }

    auto run_follower = [&](DenoiserBackend& backend, std::size_t i) {
        SequenceContext local{backend, ctx.codec, ctx.noise, ctx.inversion, ctx.access_log};
        UnifiedSampler sampler(backend, ctx.noise, plan, ctx.access_log);
        const InversionRecord record = invert_for_plan(images[i], image_id(i), i, plan, local);
        const EditResult result =
            sampler.edit_follower(record, ref_record.trace, ref_result.trace, mask_for(plan, i), i);
        out.latents[i] = result.latent;
        out.images[i] = ctx.codec.decode(result.latent);
    };

    const auto workers = static_cast<std::size_t>(std::max(1, options.workers));
    if (workers == 1 || order.size() <= 1) {
        for (auto i : order) run_follower(ctx.backend, i);
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, order.size()); ++w) {
        pool.emplace_back([&] {
            auto backend = ctx.backend.clone();
            for (std::size_t k = next++; k < order.size(); k = next++) {
                try {
                    run_follower(*backend, order[k]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

PanoramaInversion invert_panorama(const Tensor& canvas_latent, const CropPlan& latent_plan, const EditPlan& plan,
                                  const SequenceContext& ctx) {
    SEQEDIT_CHECK(canvas_latent.rank() == 3 && canvas_latent.dim(1) == latent_plan.height &&
                      canvas_latent.dim(2) == latent_plan.width,
                  Shape, "canvas latent ", shape_to_string(canvas_latent.shape()), " does not match the crop plan ",
                  latent_plan.height, "x", latent_plan.width);
    const int steps = ctx.noise.steps();
    const auto n = latent_plan.offsets.size();
    auto& backend = ctx.backend;
    ctx.backend.validate_layers(plan.layers, latent_plan.window, latent_plan.window);
    const Conditioning cond = backend.encode_text(ctx.inversion.prompt);
    const Conditioning uncond = backend.encode_text("");
    HookPlan capture;
    capture.capture = plan.layers;

    PanoramaInversion inv;
    inv.latent_plan = latent_plan;
    inv.canvas_latents.push_back(canvas_latent);
    inv.canvas_eps_inv.resize(static_cast<std::size_t>(steps));
    std::vector<std::vector<FeatureBundle>> bundles(n, std::vector<FeatureBundle>(static_cast<std::size_t>(steps)));

    for (int level = 0; level < steps; ++level) {
        const int step = steps - 1 - level;
        std::vector<Tensor> eps(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor window = slice_window(inv.canvas_latents.back(), latent_plan.offsets[i], latent_plan.window);
            auto pred = guided_noise(backend, window, ctx.noise.timestep(level + 1), cond, uncond,
                                     ctx.inversion.guidance_scale, capture,
                                     derive_seed(plan.seed, i, static_cast<std::uint64_t>(step)));
            pred.captured.step_index = step;
            pred.captured.path_id = image_id(i);
            bundles[i][static_cast<std::size_t>(step)] = std::move(pred.captured);
            eps[i] = std::move(pred.eps);
        }
        Tensor avg = scatter_average(eps, latent_plan);
        inv.canvas_latents.push_back(ddim_invert_step(inv.canvas_latents.back(), avg, level, level + 1, ctx.noise));
        inv.canvas_eps_inv[static_cast<std::size_t>(step)] = std::move(avg);
    }

    for (std::size_t i = 0; i < n; ++i) {
        InversionRecord rec;
        rec.image_id = image_id(i);
        rec.prompt = ctx.inversion.prompt;
        rec.guidance_scale = ctx.inversion.guidance_scale;
        rec.layers = plan.layers;
        rec.total_steps = steps;
        for (const auto& z : inv.canvas_latents) {
            rec.latents.push_back(slice_window(z, latent_plan.offsets[i], latent_plan.window));
        }
        for (const auto& e : inv.canvas_eps_inv) {
            rec.eps_inv.push_back(slice_window(e, latent_plan.offsets[i], latent_plan.window));
        }
        rec.trace = FeatureTrace(TraceOrigin::Inversion, rec.image_id, std::move(bundles[i]));
        inv.windows.push_back(std::move(rec));
    }
    return inv;
}

Tensor sample_panorama(const PanoramaInversion& inversion, const EditPlan& plan, const SequenceContext& ctx) {
    const auto& lp = inversion.latent_plan;
    const auto n = lp.offsets.size();
    SEQEDIT_CHECK(inversion.windows.size() == n, Validation, "panorama inversion has ", inversion.windows.size(),
                  " window records for ", n, " windows");
    const Mask* mask = plan.masks.empty() ? nullptr : &plan.masks.front();
    if (mask) {
        SEQEDIT_CHECK(mask->height() == lp.height && mask->width() == lp.width, Shape, "panorama mask is ",
                      mask->height(), "x", mask->width(), ", canvas latent is ", lp.height, "x", lp.width);
    }

    std::size_t ref = 0;
    const bool chained = std::holds_alternative<ChainedReference>(plan.reference_strategy);
    if (const auto* fixed = std::get_if<FixedReference>(&plan.reference_strategy)) {
        SEQEDIT_CHECK(fixed->ref_index >= 0 && static_cast<std::size_t>(fixed->ref_index) < n, Range,
                      "reference window ", fixed->ref_index, " outside ", n, " windows");
        ref = static_cast<std::size_t>(fixed->ref_index);
    }

    UnifiedSampler sampler(ctx.backend, ctx.noise, plan, ctx.access_log);
    Tensor canvas = inversion.canvas_latents.back();
    for (int s = 0; s < ctx.noise.steps(); ++s) {
        std::vector<Tensor> eps(n);
        std::vector<FeatureBundle> live(n);
        auto window = [&](std::size_t i) { return slice_window(canvas, lp.offsets[i], lp.window); };

        auto pred = sampler.predict_reference(s, window(ref), inversion.windows[ref], ref);
        eps[ref] = std::move(pred.eps);
        live[ref] = std::move(pred.live);
        const bool share_live = s < plan.schedule.s_context;
        if (chained) {
            for (std::size_t i = 1; i < n; ++i) {
                auto p = sampler.predict_follower(s, window(i), inversion.windows[i], inversion.windows[i - 1].trace,
                                                  share_live ? &live[i - 1] : nullptr, i);
                eps[i] = std::move(p.eps);
                live[i] = std::move(p.live);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (i == ref) continue;
                auto p = sampler.predict_follower(s, window(i), inversion.windows[i], inversion.windows[ref].trace,
                                                  share_live ? &live[ref] : nullptr, i);
                eps[i] = std::move(p.eps);
            }
        }
        Tensor avg = scatter_average(eps, lp);
        if (mask) avg = blend_masked_noise(avg, inversion.canvas_eps_inv[static_cast<std::size_t>(s)], *mask);
        canvas = sampler.advance(s, canvas, avg);
    }
    return canvas;
}

PanoramaResult edit_panorama(const Image& image, const EditPlan& plan, const SequenceContext& ctx,
                             const PanoramaOptions& options) {
    validate_plan(plan, 1);
    const auto f = ctx.codec.downsample_factor();
    SEQEDIT_CHECK(options.window % f == 0 && options.stride % f == 0 && image.width % f == 0 && image.height % f == 0,
                  Validation, "panorama sizes must be multiples of the codec factor ", f);
    PanoramaResult result;
    result.pixel_plan = make_crop_plan(image.height, image.width, options.window, options.stride);
    const CropPlan latent_plan =
        make_crop_plan(image.height / f, image.width / f, options.window / f, options.stride / f);

    const Tensor canvas_latent = ctx.codec.encode(image);
    const PanoramaInversion inversion = invert_panorama(canvas_latent, latent_plan, plan, ctx);
    result.latent = sample_panorama(inversion, plan, ctx);
    result.image = ctx.codec.decode(result.latent);
    return result;
}

}  // namespace seqedit
