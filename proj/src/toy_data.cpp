// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/toy_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace seqedit {

namespace {

struct Scene {
    std::array<double, 3> bg_a, bg_b, disc, rect;
    double cx, cy, radius;
    double rx0, ry0, rx1, ry1;
};

Scene draw_scene(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto color = [&](double lo, double hi) {
        return std::array<double, 3>{lo + (hi - lo) * unit(), lo + (hi - lo) * unit(), lo + (hi - lo) * unit()};
    };
    Scene s;
    s.bg_a = color(0.0, 60.0);
    s.bg_b = color(40.0, 110.0);
    s.disc = color(170.0, 255.0);
    s.rect = color(120.0, 255.0);
    s.radius = (0.15 + 0.12 * unit()) * std::min(width, height);
    s.cx = s.radius + unit() * (width - 2 * s.radius);
    s.cy = s.radius + unit() * (height - 2 * s.radius);
    const double rw = (0.2 + 0.2 * unit()) * width;
    const double rh = (0.2 + 0.2 * unit()) * height;
    s.rx0 = unit() * (width - rw);
    s.ry0 = unit() * (height - rh);
    s.rx1 = s.rx0 + rw;
    s.ry1 = s.ry0 + rh;
    return s;
}

Image render(const Scene& s, int width, int height, double dx) {
    Image img(width, height, 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double t = (x + y) / static_cast<double>(width + height);
            std::array<double, 3> c{};
            for (int k = 0; k < 3; ++k) c[k] = s.bg_a[k] * (1 - t) + s.bg_b[k] * t;
            const double px = x + 0.5 - dx;
            const double py = y + 0.5;
            if (px >= s.rx0 && px < s.rx1 && py >= s.ry0 && py < s.ry1) c = s.rect;
            if ((px - s.cx) * (px - s.cx) + (py - s.cy) * (py - s.cy) <= s.radius * s.radius) c = s.disc;
            for (int k = 0; k < 3; ++k) img.at(x, y, k) = static_cast<std::uint8_t>(std::lround(std::clamp(c[k], 0.0, 255.0)));
        }
    }
    return img;
}

}  // namespace

Image make_shape_image(int width, int height, std::uint64_t seed) {
    return render(draw_scene(width, height, seed), width, height, 0.0);
}

std::vector<Image> make_shape_clip(int width, int height, int frames, int shift, std::uint64_t seed) {
    const Scene scene = draw_scene(width, height, seed);
    std::vector<Image> clip;
    clip.reserve(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) clip.push_back(render(scene, width, height, static_cast<double>(f * shift)));
    return clip;
}

}  // namespace seqedit
