#include "semattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "semattn/errors.hpp"

namespace semattn {

namespace {

std::size_t product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<int> shape, Scalar fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<Scalar> values) {
    if (product(shape) != values.size()) {
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         semattn::shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

int Tensor::dim(int axis) const {
    if (axis < 0 || axis >= rank()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str());
    }
    return shape_[axis];
}

void Tensor::fill(Scalar value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::reshape(std::vector<int> shape) {
    if (product(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_str() + " to " + semattn::shape_str(shape));
    }
    shape_ = std::move(shape);
}

std::string Tensor::shape_str() const { return semattn::shape_str(shape_); }

Tensor Tensor::sample(int n) const {
    require_rank(*this, 4, "Tensor::sample");
    Tensor out({shape_[1], shape_[2], shape_[3]});
    const std::size_t stride = out.numel();
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(n * stride), stride, out.data_.begin());
    return out;
}

Tensor Tensor::stack(std::span<const Tensor> items) {
    if (items.empty()) throw ShapeError("cannot stack an empty list");
    const auto& first = items.front().shape();
    if (first.size() != 3) throw ShapeError("stack expects CHW tensors, got " + items.front().shape_str());
    Tensor out({static_cast<int>(items.size()), first[0], first[1], first[2]});
    auto dst = out.data_.begin();
    for (const auto& t : items) {
        if (t.shape() != first) throw ShapeError("stack shape mismatch: " + t.shape_str() + " vs " + semattn::shape_str(first));
        dst = std::copy(t.data_.begin(), t.data_.end(), dst);
    }
    return out;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other)) throw ShapeError("add: " + shape_str() + " vs " + other.shape_str());
    std::transform(data_.begin(), data_.end(), other.data_.begin(), data_.begin(), std::plus<>());
    return *this;
}

Tensor& Tensor::operator*=(Scalar factor) {
    for (auto& v : data_) v *= factor;
    return *this;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
}

void require_shape(const Tensor& t, const std::vector<int>& expected, const std::string& what) {
    if (t.shape() != expected) {
        throw ShapeError(what + ": expected " + shape_str(expected) + ", got " + t.shape_str());
    }
}

void require_rank(const Tensor& t, int rank, const std::string& what) {
    if (t.rank() != rank) {
        throw ShapeError(what + ": expected rank " + std::to_string(rank) + ", got " + t.shape_str());
    }
}

}  // namespace semattn
