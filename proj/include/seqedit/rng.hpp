// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "seqedit/tensor.hpp"

namespace seqedit {

/// Box-Muller over mt19937_64 bits; std::normal_distribution is not
/// reproducible across standard libraries and seeded weights must be.
class NormalRng {
public:
    explicit NormalRng(std::uint64_t seed) : m_engine(seed) {}

    double uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }
    double normal();

    RowMatrix matrix(Eigen::Index rows, Eigen::Index cols, double stddev);
    Eigen::VectorXd vector(Eigen::Index n, double stddev);

private:
    std::mt19937_64 m_engine;
    double m_spare = 0.0;
    bool m_has_spare = false;
};

std::uint64_t fnv1a(std::string_view s);

/// Sum of per-word seeded normal vectors (words are lowercased and split on
/// whitespace), divided by sqrt(word count). Empty text gives zeros.
Tensor hashed_text_vector(std::string_view text, int dim, std::uint64_t seed);

}  // namespace seqedit
