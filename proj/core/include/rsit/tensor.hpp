// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsit::kernels {

class KernelError : public std::runtime_error {
public:
    explicit KernelError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major double tensor.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }

    // 2-D accessors.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// y = x * W^T (+ bias per output column); x is [n x in], W is [out x in].
Tensor matmul_nt(const Tensor& x, const Tensor& w);
// a [m x k] * b [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a^T * b with a [k x m], b [k x n] -> [m x n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);

void add_row_vector(Tensor& x, const Tensor& v);  // v is [cols]
Tensor column_sums(const Tensor& x);              // -> [cols]

}  // namespace rsit::kernels
