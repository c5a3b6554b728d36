// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/mask.hpp"

#include <algorithm>
#include <cmath>

namespace seqedit {

Tensor blend_masked_noise(const Tensor& eps_edit, const Tensor& eps_inv, const Mask& mask) {
    SEQEDIT_CHECK(eps_edit.same_shape(eps_inv), Shape, "masked blend: edit noise ", shape_to_string(eps_edit.shape()),
                  " vs inverted noise ", shape_to_string(eps_inv.shape()));
    SEQEDIT_CHECK(eps_edit.rank() == 3 && eps_edit.dim(1) == mask.height() && eps_edit.dim(2) == mask.width(), Shape,
                  "masked blend: mask ", shape_to_string(mask.field().shape()), " does not match noise ",
                  shape_to_string(eps_edit.shape()));
    Tensor out(eps_edit.shape());
    const auto plane = static_cast<std::size_t>(mask.height() * mask.width());
    const auto& m = mask.field();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double w = m[i % plane];
        out[i] = w * eps_edit[i] + (1.0 - w) * eps_inv[i];
    }
    return out;
}

Tensor ConstantMaskProvider::field(const Image& image, std::string_view) const {
    return Tensor({image.height, image.width}, m_value);
}

RectangleMaskProvider::RectangleMaskProvider(double x0, double y0, double x1, double y1)
    : m_x0(x0), m_y0(y0), m_x1(x1), m_y1(y1) {
    SEQEDIT_CHECK(x0 <= x1 && y0 <= y1, Config, "rectangle mask needs x0 <= x1 and y0 <= y1");
}

Tensor RectangleMaskProvider::field(const Image& image, std::string_view) const {
    Tensor t({image.height, image.width}, 0.0);
    for (int y = 0; y < image.height; ++y) {
        const double cy = (y + 0.5) / image.height;
        if (cy < m_y0 || cy >= m_y1) continue;
        for (int x = 0; x < image.width; ++x) {
            const double cx = (x + 0.5) / image.width;
            if (cx >= m_x0 && cx < m_x1) t[static_cast<std::size_t>(y * image.width + x)] = 1.0;
        }
    }
    return t;
}

namespace {

Tensor gray_field(const Image& img) {
    Tensor t({img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double v = 0.0;
            for (int c = 0; c < img.channels; ++c) v += img.at(x, y, c);
            t[static_cast<std::size_t>(y * img.width + x)] = v / (255.0 * img.channels);
        }
    return t;
}

}  // namespace

Tensor FileMaskProvider::field(const Image&, std::string_view query) const {
    std::filesystem::path file = m_location;
    if (std::filesystem::is_directory(m_location)) {
        SEQEDIT_CHECK(!query.empty(), Validation, "file mask provider needs a query naming a file in ", m_location);
        file = m_location / (std::string(query) + ".png");
        if (!std::filesystem::exists(file)) file = m_location / (std::string(query) + ".pgm");
        SEQEDIT_CHECK(std::filesystem::exists(file), Io, "no mask file for query '", query, "' in ", m_location);
    }
    return gray_field(load_image(file));
}

Tensor resample_area(const Tensor& field, std::int64_t height, std::int64_t width) {
    SEQEDIT_CHECK(field.rank() == 2, Shape, "resample_area expects [H, W]");
    SEQEDIT_CHECK(height > 0 && width > 0, Validation, "resample target must be positive");
    const auto sh = field.dim(0), sw = field.dim(1);
    if (sh == height && sw == width) return field;
    const double fy = static_cast<double>(sh) / height;
    const double fx = static_cast<double>(sw) / width;
    Tensor out({height, width});
    for (std::int64_t y = 0; y < height; ++y) {
        const double y0 = y * fy, y1 = (y + 1) * fy;
        for (std::int64_t x = 0; x < width; ++x) {
            const double x0 = x * fx, x1 = (x + 1) * fx;
            double acc = 0.0;
            for (auto sy = static_cast<std::int64_t>(y0); sy < sh && sy < y1; ++sy) {
                const double wy = std::min<double>(sy + 1, y1) - std::max<double>(sy, y0);
                if (wy <= 0) continue;
                for (auto sx = static_cast<std::int64_t>(x0); sx < sw && sx < x1; ++sx) {
                    const double wx = std::min<double>(sx + 1, x1) - std::max<double>(sx, x0);
                    if (wx <= 0) continue;
                    acc += wy * wx * field[static_cast<std::size_t>(sy * sw + sx)];
                }
            }
            out[static_cast<std::size_t>(y * width + x)] = acc / (fy * fx);
        }
    }
    return out;
}

Mask acquire_mask(const Image& image, std::string_view query, const MaskProvider& provider,
                  std::int64_t latent_height, std::int64_t latent_width, bool binary) {
    Tensor raw;
    try {
        raw = provider.field(image, query);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(ErrorKind::Backend, "mask provider '", provider.id(), "' failed: ", e.what());
    }
    Mask mask(resample_area(raw, latent_height, latent_width));
    return binary ? mask.thresholded(0.5) : mask;
}

void save_mask(const Mask& mask, const std::filesystem::path& path) {
    Image img(static_cast<int>(mask.width()), static_cast<int>(mask.height()), 1);
    for (std::int64_t y = 0; y < mask.height(); ++y)
        for (std::int64_t x = 0; x < mask.width(); ++x)
            img.at(static_cast<int>(x), static_cast<int>(y), 0) =
                static_cast<std::uint8_t>(std::lround(mask(y, x) * 255.0));
    save_image(img, path);
}

Mask load_mask(const std::filesystem::path& path) {
    return Mask(gray_field(load_image(path)));
}

}  // namespace seqedit
