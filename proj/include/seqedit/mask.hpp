// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "seqedit/core.hpp"
#include "seqedit/image.hpp"

namespace seqedit {

/// eps = M * eps_edit + (1 - M) * eps_inv, with M broadcast over channels.
Tensor blend_masked_noise(const Tensor& eps_edit, const Tensor& eps_inv, const Mask& mask);

/// Produces a scalar field for an image and a text query, at any resolution.
class MaskProvider {
public:
    virtual ~MaskProvider() = default;
    virtual std::string id() const = 0;
    /// [H, W] field; values are clamped later.
    virtual Tensor field(const Image& image, std::string_view query) const = 0;
};

class ConstantMaskProvider final : public MaskProvider {
public:
    explicit ConstantMaskProvider(double value) : m_value(value) {}
    std::string id() const override { return "constant"; }
    Tensor field(const Image& image, std::string_view query) const override;

private:
    double m_value;
};

/// 1 inside [x0, x1) x [y0, y1) given as fractions of the image size.
class RectangleMaskProvider final : public MaskProvider {
public:
    RectangleMaskProvider(double x0, double y0, double x1, double y1);
    std::string id() const override { return "rectangle"; }
    Tensor field(const Image& image, std::string_view query) const override;

private:
    double m_x0, m_y0, m_x1, m_y1;
};

/// Grayscale mask images. With a directory, the query names the file stem
/// (`<dir>/<query>.png`, then `.pgm`); with a file, the query is ignored.
class FileMaskProvider final : public MaskProvider {
public:
    explicit FileMaskProvider(std::filesystem::path location) : m_location(std::move(location)) {}
    std::string id() const override { return "file"; }
    Tensor field(const Image& image, std::string_view query) const override;

private:
    std::filesystem::path m_location;
};

/// Area-averaging resample of an [H, W] field.
Tensor resample_area(const Tensor& field, std::int64_t height, std::int64_t width);

/// Runs the provider, resamples to latent resolution and clamps to [0, 1].
/// With binary set, thresholds at 0.5.
Mask acquire_mask(const Image& image, std::string_view query, const MaskProvider& provider,
                  std::int64_t latent_height, std::int64_t latent_width, bool binary = false);

void save_mask(const Mask& mask, const std::filesystem::path& path);
Mask load_mask(const std::filesystem::path& path);

}  // namespace seqedit
