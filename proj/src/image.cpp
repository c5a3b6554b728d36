// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "seqedit/error.hpp"

namespace seqedit {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

Image load_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    SEQEDIT_CHECK(png_image_begin_read_from_file(&png, path.c_str()) != 0, Io, "cannot read PNG ", path, ": ",
                  png.message);
    const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
    png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image img(static_cast<int>(png.width), static_cast<int>(png.height), gray ? 1 : 3);
    const int ok = png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr);
    if (!ok) {
        const std::string message = png.message;
        png_image_free(&png);
        raise(ErrorKind::Io, "cannot decode PNG ", path, ": ", message);
    }
    return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
    SEQEDIT_CHECK(img.channels == 1 || img.channels == 3, Io, "PNG output needs 1 or 3 channels");
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    SEQEDIT_CHECK(png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr) != 0, Io,
                  "cannot write PNG ", path, ": ", png.message);
}

void skip_pnm_whitespace(std::istream& in) {
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

Image load_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    SEQEDIT_CHECK(in, Io, "cannot open ", path);
    std::string magic;
    in >> magic;
    SEQEDIT_CHECK(magic == "P6" || magic == "P5", Io, path, ": only binary P5/P6 files are supported");
    int w = 0, h = 0, maxval = 0;
    skip_pnm_whitespace(in);
    in >> w;
    skip_pnm_whitespace(in);
    in >> h;
    skip_pnm_whitespace(in);
    in >> maxval;
    in.get();
    SEQEDIT_CHECK(in && w > 0 && h > 0 && maxval == 255, Io, path, ": malformed header");
    Image img(w, h, magic == "P6" ? 3 : 1);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    SEQEDIT_CHECK(in, Io, path, ": truncated pixel data");
    return img;
}

void save_pnm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    SEQEDIT_CHECK(out, Io, "cannot write ", path);
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    SEQEDIT_CHECK(out, Io, "failed writing ", path);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    SEQEDIT_CHECK(std::filesystem::exists(path), Io, "no such file: ", path);
    const auto ext = lower_extension(path);
    if (ext == ".png") return load_png(path);
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return load_pnm(path);
    raise(ErrorKind::Io, "unsupported image extension '", ext, "' for ", path);
}

void save_image(const Image& image, const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        SEQEDIT_CHECK(!ec, Io, "cannot create ", path.parent_path(), ": ", ec.message());
    }
    if (ext == ".png") return save_png(image, path);
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return save_pnm(image, path);
    raise(ErrorKind::Io, "unsupported image extension '", ext, "' for ", path);
}

Image resize_bilinear(const Image& image, int width, int height) {
    SEQEDIT_CHECK(width > 0 && height > 0, Validation, "resize target must be positive");
    if (width == image.width && height == image.height) return image;
    Image out(width, height, image.channels);
    const double sx = static_cast<double>(image.width) / width;
    const double sy = static_cast<double>(image.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = image.at(x0, y0, c) * (1 - wx) + image.at(x1, y0, c) * wx;
                const double bottom = image.at(x0, y1, c) * (1 - wx) + image.at(x1, y1, c) * wx;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - wy) + bottom * wy));
            }
        }
    }
    return out;
}

Image crop_columns(const Image& image, int x0, int width) {
    SEQEDIT_CHECK(x0 >= 0 && width > 0 && x0 + width <= image.width, Range, "crop [", x0, ", ", x0 + width,
                  ") outside image width ", image.width);
    Image out(width, image.height, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < image.channels; ++c) out.at(x, y, c) = image.at(x0 + x, y, c);
    return out;
}

Tensor IdentityCodec::encode(const Image& image) const {
    SEQEDIT_CHECK(image.channels == 3, Backend, "identity codec expects RGB input, got ", image.channels,
                  " channels");
    Tensor t({3, image.height, image.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) t.at(c, y, x) = image.at(x, y, c) / 127.5 - 1.0;
    return t;
}

Image IdentityCodec::decode(const Tensor& latent) const {
    SEQEDIT_CHECK(latent.rank() == 3 && latent.dim(0) == 3, Shape, "identity codec expects [3, H, W], got ",
                  shape_to_string(latent.shape()));
    SEQEDIT_CHECK(latent.all_finite(), Numeric, "non-finite latent passed to decoder");
    Image img(static_cast<int>(latent.dim(2)), static_cast<int>(latent.dim(1)), 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double v = std::round((latent.at(c, y, x) + 1.0) * 127.5);
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
    return img;
}

}  // namespace seqedit
