// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "seqedit/image.hpp"

namespace seqedit {

/// Synthetic shape image: a two-color gradient background with a filled disc
/// and a filled rectangle, all parameters drawn from the seed.
Image make_shape_image(int width, int height, std::uint64_t seed);

/// A short clip of the same scene with the shapes translated by `shift`
/// pixels per frame.
std::vector<Image> make_shape_clip(int width, int height, int frames, int shift, std::uint64_t seed);

}  // namespace seqedit
