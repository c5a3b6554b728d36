// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqedit/error.hpp"
#include "seqedit/rng.hpp"

namespace seqedit {

StubEmbedder::StubEmbedder(std::uint64_t seed, int dim, int grid) : m_seed(seed), m_dim(dim), m_grid(grid) {
    SEQEDIT_CHECK(dim > 0 && grid > 0, Config, "stub embedder needs positive dim and grid");
    NormalRng rng(seed);
    const Eigen::Index inputs = static_cast<Eigen::Index>(grid) * grid * 3;
    m_projection = rng.matrix(dim, inputs, 1.0 / std::sqrt(static_cast<double>(inputs)));
}

Embedding StubEmbedder::embed_image(const Image& image) const {
    SEQEDIT_CHECK(image.width > 0 && image.height > 0, Validation, "cannot embed an empty image");
    Eigen::VectorXd cells = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_grid) * m_grid * 3);
    std::vector<int> counts(static_cast<std::size_t>(m_grid * m_grid), 0);
    for (int y = 0; y < image.height; ++y) {
        const int gy = static_cast<int>(static_cast<std::int64_t>(y) * m_grid / image.height);
        for (int x = 0; x < image.width; ++x) {
            const int gx = static_cast<int>(static_cast<std::int64_t>(x) * m_grid / image.width);
            const int cell = gy * m_grid + gx;
            ++counts[static_cast<std::size_t>(cell)];
            for (int c = 0; c < 3; ++c) {
                const int src = image.channels == 1 ? 0 : c;
                cells[cell * 3 + c] += image.at(x, y, src) / 127.5 - 1.0;
            }
        }
    }
    for (int cell = 0; cell < m_grid * m_grid; ++cell) {
        const int n = std::max(1, counts[static_cast<std::size_t>(cell)]);
        for (int c = 0; c < 3; ++c) cells[cell * 3 + c] /= n;
    }
    const Eigen::VectorXd out = m_projection * cells;
    return {out.data(), out.data() + out.size()};
}

Embedding StubEmbedder::embed_text(std::string_view text) const {
    const Tensor v = hashed_text_vector(text, m_dim, m_seed ^ 0x9E3779B97F4A7C15ull);
    return {v.values().begin(), v.values().end()};
}

namespace {

double dot(const Embedding& a, const Embedding& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

Embedding minus(const Embedding& a, const Embedding& b) {
    SEQEDIT_CHECK(a.size() == b.size(), Shape, "embedding sizes differ: ", a.size(), " vs ", b.size());
    Embedding out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

}  // namespace

Embedding normalized(const Embedding& v) {
    const double n = std::sqrt(dot(v, v));
    SEQEDIT_CHECK(std::isfinite(n) && n > 0.0, Numeric, "embedding has zero or non-finite norm");
    Embedding out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

double cosine(const Embedding& a, const Embedding& b) {
    SEQEDIT_CHECK(a.size() == b.size(), Shape, "embedding sizes differ: ", a.size(), " vs ", b.size());
    const double aa = dot(a, a);
    const double bb = dot(b, b);
    if (aa == 0.0 || bb == 0.0) return 0.0;
    // sqrt(x * x) == x in IEEE arithmetic, so identical inputs give exactly 1.
    return std::clamp(dot(a, b) / std::sqrt(aa * bb), -1.0, 1.0);
}

Embedding image_embedding(const Embedder& embedder, const Image& image) {
    try {
        return normalized(embedder.embed_image(image));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(ErrorKind::Backend, "embedder '", embedder.id(), "' failed on an image: ", e.what());
    }
}

Embedding text_embedding(const Embedder& embedder, std::string_view text) {
    try {
        return normalized(embedder.embed_text(text));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(ErrorKind::Backend, "embedder '", embedder.id(), "' failed on text: ", e.what());
    }
}

double directional_score(const Embedding& source_image, const Embedding& output_image, const Embedding& source_text,
                         const Embedding& target_text) {
    return cosine(minus(output_image, source_image), minus(target_text, source_text));
}

double directional_score(const Image& source, const Image& output, std::string_view source_text,
                         std::string_view target_text, const Embedder& embedder) {
    return directional_score(image_embedding(embedder, source), image_embedding(embedder, output),
                             text_embedding(embedder, source_text), text_embedding(embedder, target_text));
}

double consistency_score(const std::vector<Embedding>& embeddings) {
    SEQEDIT_CHECK(embeddings.size() >= 2, Validation, "consistency needs at least 2 images, got ", embeddings.size());
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
            sum += cosine(embeddings[i], embeddings[j]);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

double consistency_score(const std::vector<Image>& images, const Embedder& embedder) {
    SEQEDIT_CHECK(images.size() >= 2, Validation, "consistency needs at least 2 images, got ", images.size());
    std::vector<Embedding> e;
    for (const auto& img : images) e.push_back(image_embedding(embedder, img));
    return consistency_score(e);
}

double text_image_similarity(const Image& image, std::string_view text, const Embedder& embedder) {
    return cosine(image_embedding(embedder, image), text_embedding(embedder, text));
}

double pixel_mse(const Image& a, const Image& b) {
    SEQEDIT_CHECK(a.width == b.width && a.height == b.height && a.channels == b.channels, Shape,
                  "pixel distance needs matching sizes: ", a.width, "x", a.height, "x", a.channels, " vs ", b.width,
                  "x", b.height, "x", b.channels);
    SEQEDIT_CHECK(!a.pixels.empty(), Validation, "pixel distance of empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(a.pixels.size());
}

namespace {

Image crop(const Image& img, int x0, int y0, int x1, int y1) {
    Image out(x1 - x0, y1 - y0, img.channels);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(x - x0, y - y0, c) = img.at(x, y, c);
    return out;
}

}  // namespace

double structure_distance(const Image& source, const Image& output, const PerceptualDistance& perceptual,
                          PatchGrid grid) {
    SEQEDIT_CHECK(source.width == output.width && source.height == output.height &&
                      source.channels == output.channels,
                  Shape, "structure distance needs matching sizes");
    SEQEDIT_CHECK(grid.rows >= 1 && grid.cols >= 1 && grid.rows <= source.height && grid.cols <= source.width,
                  Validation, "patch grid ", grid.rows, "x", grid.cols, " does not fit ", source.width, "x",
                  source.height);
    if (grid.rows == 1 && grid.cols == 1) return perceptual(source, output);
    double sum = 0.0;
    for (int r = 0; r < grid.rows; ++r) {
        const int y0 = r * source.height / grid.rows, y1 = (r + 1) * source.height / grid.rows;
        for (int c = 0; c < grid.cols; ++c) {
            const int x0 = c * source.width / grid.cols, x1 = (c + 1) * source.width / grid.cols;
            sum += perceptual(crop(source, x0, y0, x1, y1), crop(output, x0, y0, x1, y1));
        }
    }
    return sum / (grid.rows * grid.cols);
}

MetricsReport evaluate_pairs(const std::vector<std::string>& names, const std::vector<Image>& sources,
                             const std::vector<Image>& outputs, std::string_view source_text,
                             std::string_view target_text, const Embedder& embedder,
                             const PerceptualDistance& perceptual, PatchGrid grid) {
    SEQEDIT_CHECK(!sources.empty(), Validation, "nothing to evaluate");
    SEQEDIT_CHECK(names.size() == sources.size() && sources.size() == outputs.size(), Validation,
                  "evaluation needs one output per source: ", sources.size(), " sources, ", outputs.size(),
                  " outputs");
    MetricsReport r;
    r.embedder_id = embedder.id();
    r.source_text = source_text;
    r.target_text = target_text;
    r.image_names = names;
    const auto st = text_embedding(embedder, source_text);
    const auto tt = text_embedding(embedder, target_text);
    std::vector<Embedding> out_embeddings;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto se = image_embedding(embedder, sources[i]);
        const auto oe = image_embedding(embedder, outputs[i]);
        r.directional.push_back(directional_score(se, oe, st, tt));
        r.text_similarity.push_back(cosine(oe, tt));
        r.structure.push_back(structure_distance(sources[i], outputs[i], perceptual, grid));
        out_embeddings.push_back(oe);
    }
    const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    r.mean_directional = mean(r.directional);
    r.mean_text_similarity = mean(r.text_similarity);
    r.mean_structure = mean(r.structure);
    r.consistency = out_embeddings.size() >= 2 ? consistency_score(out_embeddings) : 1.0;
    return r;
}

}  // namespace seqedit
