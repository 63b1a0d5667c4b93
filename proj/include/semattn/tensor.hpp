#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace semattn {

using Scalar = double;

// Dense row-major tensor. Feature maps are NCHW, single-sample feature maps
// are CHW, linear activations are NF.
class Tensor {
 public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, Scalar fill = 0);
    Tensor(std::initializer_list<int> shape, Scalar fill = 0)
        : Tensor(std::vector<int>(shape), fill) {}

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }
    static Tensor from_values(std::vector<int> shape, std::vector<Scalar> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const;
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }
    std::span<Scalar> values() { return data_; }
    std::span<const Scalar> values() const { return data_; }

    Scalar& operator[](std::size_t i) { return data_[i]; }
    Scalar operator[](std::size_t i) const { return data_[i]; }

    Scalar& at(int n, int c, int h, int w) {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    Scalar at(int n, int c, int h, int w) const {
        return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    void fill(Scalar value);
    void reshape(std::vector<int> shape);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    // Sample `n` of an NCHW tensor as a CHW tensor (copy).
    Tensor sample(int n) const;
    // Stack CHW tensors into NCHW.
    static Tensor stack(std::span<const Tensor> items);

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(Scalar factor);

    bool all_finite() const;

 private:
    std::vector<int> shape_;
    std::vector<Scalar> data_;
};

std::string shape_str(const std::vector<int>& shape);

// Throws ShapeError with `what` as context unless `t` has exactly `expected`.
void require_shape(const Tensor& t, const std::vector<int>& expected, const std::string& what);
void require_rank(const Tensor& t, int rank, const std::string& what);

}  // namespace semattn
