// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#include "seqedit/tensor.hpp"

#include <cmath>
#include <sstream>

#include "seqedit/error.hpp"

namespace seqedit {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Range: return "range";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Io: return "io";
        case ErrorKind::Config: return "config";
        case ErrorKind::Backend: return "backend";
        case ErrorKind::Registry: return "registry";
    }
    return "unknown";
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream ss;
    ss << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) ss << ", ";
        ss << shape[i];
    }
    ss << ']';
    return ss.str();
}

std::int64_t element_count(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        SEQEDIT_CHECK(d >= 0, Shape, "negative dimension in shape ", shape_to_string(shape));
        n *= d;
    }
    return n;
}

Tensor::Tensor(Shape shape, double fill)
    : m_shape(std::move(shape)),
      m_data(static_cast<std::size_t>(element_count(m_shape)), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : m_shape(std::move(shape)), m_data(std::move(data)) {
    SEQEDIT_CHECK(static_cast<std::int64_t>(m_data.size()) == element_count(m_shape), Shape,
                  "tensor of shape ", shape_to_string(m_shape), " cannot hold ", m_data.size(), " values");
}

MatrixMap Tensor::matrix() {
    SEQEDIT_CHECK(rank() == 2, Shape, "matrix view needs a rank-2 tensor, got ", shape_to_string(m_shape));
    return MatrixMap(m_data.data(), m_shape[0], m_shape[1]);
}

ConstMatrixMap Tensor::matrix() const {
    SEQEDIT_CHECK(rank() == 2, Shape, "matrix view needs a rank-2 tensor, got ", shape_to_string(m_shape));
    return ConstMatrixMap(m_data.data(), m_shape[0], m_shape[1]);
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
    Tensor t({m.rows(), m.cols()});
    t.matrix() = m;
    return t;
}

bool Tensor::all_finite() const noexcept {
    for (double v : m_data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double relative_l2(const Tensor& a, const Tensor& b) {
    SEQEDIT_CHECK(a.same_shape(b), Shape, "relative_l2: ", shape_to_string(a.shape()), " vs ",
                  shape_to_string(b.shape()));
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        num += d * d;
        den += b[i] * b[i];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    SEQEDIT_CHECK(a.same_shape(b), Shape, "max_abs_diff: ", shape_to_string(a.shape()), " vs ",
                  shape_to_string(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor slice_width(const Tensor& chw, std::int64_t x0, std::int64_t width) {
    SEQEDIT_CHECK(chw.rank() == 3, Shape, "slice_width expects [C, H, W]");
    const auto c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    SEQEDIT_CHECK(x0 >= 0 && width > 0 && x0 + width <= w, Range, "column slice [", x0, ", ", x0 + width,
                  ") outside width ", w);
    Tensor out({c, h, width});
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < width; ++x) out.at(ch, y, x) = chw.at(ch, y, x0 + x);
    return out;
}

}  // namespace seqedit
