// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqedit/core.hpp"
#include "seqedit/ddim.hpp"
#include "seqedit/image.hpp"
#include "seqedit/sampler.hpp"

namespace seqedit {

struct WindowOffset {
    std::int64_t y = 0;
    std::int64_t x = 0;

    friend bool operator==(const WindowOffset&, const WindowOffset&) = default;
};

/// Square windows tiling a canvas row-major, left to right. When the canvas
/// length minus the window is not a multiple of the stride, the last window
/// along that axis snaps to the canvas edge.
struct CropPlan {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t window = 0;
    std::int64_t stride = 0;
    std::vector<WindowOffset> offsets;
    std::vector<std::int32_t> coverage;  // [height * width]
    bool snapped = false;

    std::int32_t coverage_at(std::int64_t y, std::int64_t x) const {
        return coverage[static_cast<std::size_t>(y * width + x)];
    }
};

CropPlan make_crop_plan(std::int64_t height, std::int64_t width, std::int64_t window, std::int64_t stride);

/// canvas[p] = sum over windows containing p of pred[p], divided by coverage(p).
/// Windows are accumulated in plan order.
Tensor scatter_average(const std::vector<Tensor>& per_window, const CropPlan& plan);

/// Cuts the [C, window, window] tile at `offset` out of a [C, H, W] canvas.
Tensor slice_window(const Tensor& canvas, const WindowOffset& offset, std::int64_t window);

/// Evenly spaced indices selecting `budget` of `total` items (all of them
/// when budget is 0 or >= total).
std::vector<std::size_t> subsample_uniform(std::size_t total, std::size_t budget);

struct InversionSettings {
    std::string prompt;           // empty prompt by default
    double guidance_scale = 1.0;  // unguided by default
};

/// Everything a driver needs besides the images and the plan.
struct SequenceContext {
    DenoiserBackend& backend;
    const Codec& codec;
    const NoiseSchedule& noise;
    InversionSettings inversion;
    TraceAccessLog* access_log = nullptr;
};

struct SequenceResult {
    std::vector<Image> images;
    std::vector<Tensor> latents;
};

/// Inverts one image of a sequence with the plan's layers.
InversionRecord invert_for_plan(const Image& image, const std::string& image_id, std::size_t index,
                                const EditPlan& plan, const SequenceContext& ctx);

/// Sequential (chained) editing: frame 0 is edited as the reference, frame i
/// follows frame i - 1. Only the predecessor's traces are kept.
class ChainedEditor {
public:
    ChainedEditor(const SequenceContext& ctx, EditPlan plan);

    struct Step {
        Image image;
        Tensor latent;
    };

    /// Inverts and edits the next frame.
    Step edit_next(const Image& frame, const std::string& frame_id);
    /// Edits the next frame from an existing inversion record.
    Step edit_next(const InversionRecord& record);

    /// Restores the predecessor state, e.g. after an interrupted run.
    void resume(InversionRecord predecessor_record, EditTrace predecessor_trace, std::size_t frames_done);

    std::size_t frames_done() const noexcept { return m_done; }
    const InversionRecord* predecessor_record() const { return m_prev_record ? &*m_prev_record : nullptr; }
    const EditTrace* predecessor_trace() const { return m_prev_trace ? &*m_prev_trace : nullptr; }

private:
    const SequenceContext& m_ctx;
    EditPlan m_plan;
    UnifiedSampler m_sampler;
    std::optional<InversionRecord> m_prev_record;
    std::optional<EditTrace> m_prev_trace;
    std::size_t m_done = 0;
};

/// Video frames with chained referencing.
SequenceResult edit_video(const std::vector<Image>& frames, const EditPlan& plan, const SequenceContext& ctx);

struct MultiviewOptions {
    int workers = 1;
    /// Order in which followers run; empty means ascending index.
    std::vector<std::size_t> follower_order;
};

/// Multiview sets with one fixed reference whose traces are frozen and shared
/// by every follower. Followers may run on several workers, each with its own
/// backend clone.
SequenceResult edit_multiview(const std::vector<Image>& images, const EditPlan& plan, const SequenceContext& ctx,
                              const MultiviewOptions& options = {});

struct PanoramaOptions {
    std::int64_t window = 512;  // pixels
    std::int64_t stride = 256;  // pixels
};

/// Canvas-level inversion of a panorama plus one record per window.
struct PanoramaInversion {
    CropPlan latent_plan;
    std::vector<Tensor> canvas_latents;  // per noise level
    std::vector<Tensor> canvas_eps_inv;  // per sampling step
    std::vector<InversionRecord> windows;
};

PanoramaInversion invert_panorama(const Tensor& canvas_latent, const CropPlan& latent_plan, const EditPlan& plan,
                                  const SequenceContext& ctx);

struct PanoramaResult {
    Image image;
    Tensor latent;
    CropPlan pixel_plan;
};

/// Joint canvas sampling: at every step the window latents are cut from the
/// canvas, the reference window steps first (chained: window i follows
/// window i - 1 within the step), the per-window noise is scatter-averaged
/// and one DDIM step moves the canvas.
PanoramaResult edit_panorama(const Image& image, const EditPlan& plan, const SequenceContext& ctx,
                             const PanoramaOptions& options = {});

/// The sampling half of edit_panorama, for a canvas that is already inverted.
Tensor sample_panorama(const PanoramaInversion& inversion, const EditPlan& plan, const SequenceContext& ctx);

}  // namespace seqedit
