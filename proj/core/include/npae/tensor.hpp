#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace npae {

/// Dense row-major tensor of doubles. Rank is dynamic; extents are
/// positive. This is the value type flowing through every layer, so it
/// stays deliberately small: storage, shape and indexing, nothing else.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<int> shape);

    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor full(std::vector<int> shape, double value);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Row-major indexing for the common ranks.
    double& at(int i0, int i1) { return data_[flat2(i0, i1)]; }
    double at(int i0, int i1) const { return data_[flat2(i0, i1)]; }
    double& at(int i0, int i1, int i2) { return data_[flat3(i0, i1, i2)]; }
    double at(int i0, int i1, int i2) const { return data_[flat3(i0, i1, i2)]; }
    double& at(int i0, int i1, int i2, int i3) { return data_[flat4(i0, i1, i2, i3)]; }
    double at(int i0, int i1, int i2, int i3) const { return data_[flat4(i0, i1, i2, i3)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// Reinterpret the data under a new shape of equal element count.
    Tensor reshaped(std::vector<int> shape) const;

    bool all_finite() const;

    std::string shape_string() const;

private:
    std::size_t flat2(int i0, int i1) const {
        return static_cast<std::size_t>(i0) * static_cast<std::size_t>(shape_[1]) +
               static_cast<std::size_t>(i1);
    }
    std::size_t flat3(int i0, int i1, int i2) const {
        return (static_cast<std::size_t>(i0) * static_cast<std::size_t>(shape_[1]) +
                static_cast<std::size_t>(i1)) *
                   static_cast<std::size_t>(shape_[2]) +
               static_cast<std::size_t>(i2);
    }
    std::size_t flat4(int i0, int i1, int i2, int i3) const {
        return ((static_cast<std::size_t>(i0) * static_cast<std::size_t>(shape_[1]) +
                 static_cast<std::size_t>(i1)) *
                    static_cast<std::size_t>(shape_[2]) +
                static_cast<std::size_t>(i2)) *
                   static_cast<std::size_t>(shape_[3]) +
               static_cast<std::size_t>(i3);
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

std::int64_t shape_volume(const std::vector<int>& shape);

}  // namespace npae
