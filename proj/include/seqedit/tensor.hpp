// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace seqedit {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

using Shape = std::vector<std::int64_t>;

std::string shape_to_string(const Shape& shape);
std::int64_t element_count(const Shape& shape);

/// Dense row-major double tensor. Latents and resnet features are laid out as
/// [C, H, W]; attention features are token matrices [tokens, dim].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return m_shape; }
    std::int64_t dim(std::size_t axis) const { return m_shape.at(axis); }
    std::size_t rank() const noexcept { return m_shape.size(); }
    std::size_t size() const noexcept { return m_data.size(); }
    bool empty() const noexcept { return m_data.empty(); }

    double* data() noexcept { return m_data.data(); }
    const double* data() const noexcept { return m_data.data(); }
    std::span<double> values() noexcept { return m_data; }
    std::span<const double> values() const noexcept { return m_data; }
    const std::vector<double>& storage() const noexcept { return m_data; }

    double& operator[](std::size_t i) { return m_data[i]; }
    double operator[](std::size_t i) const { return m_data[i]; }

    /// Element access for [C, H, W] tensors.
    double& at(std::int64_t c, std::int64_t y, std::int64_t x) {
        return m_data[static_cast<std::size_t>((c * m_shape[1] + y) * m_shape[2] + x)];
    }
    double at(std::int64_t c, std::int64_t y, std::int64_t x) const {
        return m_data[static_cast<std::size_t>((c * m_shape[1] + y) * m_shape[2] + x)];
    }

    /// View a rank-2 tensor as an Eigen matrix.
    MatrixMap matrix();
    ConstMatrixMap matrix() const;

    static Tensor from_matrix(const RowMatrix& m);

    bool same_shape(const Tensor& other) const noexcept { return m_shape == other.m_shape; }
    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.m_shape == b.m_shape && a.m_data == b.m_data;
    }

private:
    Shape m_shape;
    std::vector<double> m_data;
};

using TensorRef = std::shared_ptr<const Tensor>;

inline TensorRef share(Tensor t) { return std::make_shared<const Tensor>(std::move(t)); }

/// ||a - b|| / ||b||; returns ||a|| when b is zero.
double relative_l2(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Slice columns [x0, x0 + width) out of a [C, H, W] tensor.
Tensor slice_width(const Tensor& chw, std::int64_t x0, std::int64_t width);

}  // namespace seqedit
