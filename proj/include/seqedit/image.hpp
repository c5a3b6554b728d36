// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "seqedit/tensor.hpp"

namespace seqedit {

/// 8-bit interleaved image (RGB or grayscale).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

    std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Reads PNG (8-bit, any color type is converted) or binary PPM/PGM.
Image load_image(const std::filesystem::path& path);
/// Writes PNG or PPM/PGM depending on the extension.
void save_image(const Image& image, const std::filesystem::path& path);

/// Bilinear resize (pixel centers aligned).
Image resize_bilinear(const Image& image, int width, int height);
/// Column crop [x0, x0 + width).
Image crop_columns(const Image& image, int x0, int width);

/// Maps images to backend latents and back.
class Codec {
public:
    virtual ~Codec() = default;
    virtual std::string id() const = 0;
    virtual int latent_channels() const = 0;
    /// Pixel size of one latent cell along each axis.
    virtual int downsample_factor() const = 0;
    virtual Tensor encode(const Image& image) const = 0;
    virtual Image decode(const Tensor& latent) const = 0;
};

/// RGB bytes to [-1, 1] floats and back, one latent cell per pixel.
class IdentityCodec final : public Codec {
public:
    std::string id() const override { return "identity"; }
    int latent_channels() const override { return 3; }
    int downsample_factor() const override { return 1; }
    Tensor encode(const Image& image) const override;
    Image decode(const Tensor& latent) const override;
};

}  // namespace seqedit
