#pragma once

#include <Eigen/Dense>

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gibbs::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// Dense row-major tensor of doubles. Image batches use NHWC order.
struct Tensor {
    Shape shape;
    Eigen::VectorXd values;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), values(Eigen::VectorXd::Zero(shape_size(shape))) {}
    Tensor(Shape s, Eigen::VectorXd v) : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != shape_size(shape)) throw std::invalid_argument("tensor value count does not match shape");
    }

    Index size() const { return values.size(); }
    Index dim(std::size_t i) const { return shape.at(i); }
    Index rank() const { return static_cast<Index>(shape.size()); }

    /// View as a (rows x size/rows) row-major matrix.
    Eigen::Map<RowMatrix> matrix(Index rows) { return {values.data(), rows, size() / rows}; }
    Eigen::Map<const RowMatrix> matrix(Index rows) const { return {values.data(), rows, size() / rows}; }

    Tensor reshaped(Shape s) const {
        if (shape_size(s) != size()) throw std::invalid_argument("reshape changes element count");
        return Tensor(std::move(s), values);
    }
};

}  // namespace gibbs::nn
