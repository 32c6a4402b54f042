#include "npae/tensor.hpp"

#include <cmath>
#include <sstream>

#include "npae/errors.hpp"

namespace npae {

std::int64_t shape_volume(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw InvalidArgument("tensor extents must be positive");
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_volume(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)) {
    if (shape_volume(shape_) != static_cast<std::int64_t>(data.size())) {
        throw InvalidArgument("tensor data length does not match shape volume");
    }
    data_ = std::move(data);
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (shape_volume(shape) != size()) {
        throw InvalidArgument("reshape must preserve element count");
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

}  // namespace npae
