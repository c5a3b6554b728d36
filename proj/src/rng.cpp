// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/rng.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

namespace seqedit {

double NormalRng::normal() {
    if (m_has_spare) {
        m_has_spare = false;
        return m_spare;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    m_spare = r * std::sin(2.0 * std::numbers::pi * u2);
    m_has_spare = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

RowMatrix NormalRng::matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal();
    return m;
}

Eigen::VectorXd NormalRng::vector(Eigen::Index n, double stddev) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = stddev * normal();
    return v;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Tensor hashed_text_vector(std::string_view text, int dim, std::uint64_t seed) {
    Tensor out({dim}, 0.0);
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::string word;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
            ++i;
        }
        if (word.empty()) continue;
        NormalRng rng(fnv1a(word) ^ seed);
        for (int d = 0; d < dim; ++d) out[static_cast<std::size_t>(d)] += rng.normal();
        ++words;
    }
    if (words > 0) {
        const double norm = 1.0 / std::sqrt(static_cast<double>(words));
        for (auto& v : out.values()) v *= norm;
    }
    return out;
}

}  // namespace seqedit
