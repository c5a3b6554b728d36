// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "seqedit/image.hpp"

namespace seqedit {

using Embedding = std::vector<double>;

/// Image and text encoder into a shared space. The harness normalizes
/// whatever comes back.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual Embedding embed_image(const Image& image) const = 0;
    virtual Embedding embed_text(std::string_view text) const = 0;
};

/// Deterministic desk-scale embedder: area-downsampled pixels through a seeded
/// Gaussian projection; text as a sum of hashed per-word vectors.
class StubEmbedder final : public Embedder {
public:
    explicit StubEmbedder(std::uint64_t seed = 7, int dim = 64, int grid = 8);
    std::string id() const override { return "stub"; }
    Embedding embed_image(const Image& image) const override;
    Embedding embed_text(std::string_view text) const override;

private:
    std::uint64_t m_seed;
    int m_dim;
    int m_grid;
    RowMatrix m_projection;  // [dim, grid * grid * 3]
};

/// Unit-norm copy; throws Numeric on a zero or non-finite vector.
Embedding normalized(const Embedding& v);
/// cos(a, b); 0 when either vector has zero norm.
double cosine(const Embedding& a, const Embedding& b);

Embedding image_embedding(const Embedder& embedder, const Image& image);
Embedding text_embedding(const Embedder& embedder, std::string_view text);

double directional_score(const Image& source, const Image& output, std::string_view source_text,
                         std::string_view target_text, const Embedder& embedder);
/// Same score on precomputed unit embeddings.
double directional_score(const Embedding& source_image, const Embedding& output_image, const Embedding& source_text,
                         const Embedding& target_text);

/// Mean pairwise cosine over all unordered pairs; needs at least 2 images.
double consistency_score(const std::vector<Image>& images, const Embedder& embedder);
double consistency_score(const std::vector<Embedding>& embeddings);

/// Plain text-image cosine.
double text_image_similarity(const Image& image, std::string_view text, const Embedder& embedder);

/// Distance between two equally sized patches.
using PerceptualDistance = std::function<double(const Image&, const Image&)>;

/// Mean squared difference in 0..255 pixel units.
double pixel_mse(const Image& a, const Image& b);

struct PatchGrid {
    int rows = 1;
    int cols = 1;
};

/// Mean distance over an aligned rows x cols patch grid. Patch edges are
/// floor(k * size / n), so every pixel belongs to exactly one patch.
double structure_distance(const Image& source, const Image& output, const PerceptualDistance& perceptual = pixel_mse,
                          PatchGrid grid = {});

/// Per-run scores as written to the metrics report.
struct MetricsReport {
    std::string embedder_id;
    std::string source_text;
    std::string target_text;
    std::vector<std::string> image_names;
    std::vector<double> directional;
    std::vector<double> text_similarity;
    std::vector<double> structure;
    double mean_directional = 0.0;
    double mean_text_similarity = 0.0;
    double mean_structure = 0.0;
    double consistency = 0.0;  // NaN-free; 1 for a single image
};

MetricsReport evaluate_pairs(const std::vector<std::string>& names, const std::vector<Image>& sources,
                             const std::vector<Image>& outputs, std::string_view source_text,
                             std::string_view target_text, const Embedder& embedder,
                             const PerceptualDistance& perceptual = pixel_mse, PatchGrid grid = {});

}  // namespace seqedit
