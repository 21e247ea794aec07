// SPDX-License-Identifier: Apache-2.0

#include "rsit/tensor.hpp"

#include <cmath>
#include <numeric>

namespace rsit::kernels {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (const std::size_t e : shape) {
        if (e == 0) throw KernelError("tensor extent must be positive");
        n *= e;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (checked_numel(shape_) != data_.size())
        throw KernelError("tensor value count does not match shape");
    if (!all_finite()) throw KernelError("tensor holds non-finite values");
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw KernelError("rows(): tensor is not 2-D");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw KernelError("cols(): tensor is not 2-D");
    return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

bool Tensor::all_finite() const {
    for (const double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor matmul_nt(const Tensor& x, const Tensor& w) {
    if (x.cols() != w.cols()) throw KernelError("matmul_nt: inner extents differ");
    Tensor out({x.rows(), w.rows()});
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t o = 0; o < w.rows(); ++o) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.cols(); ++k) acc += x.at(i, k) * w.at(o, k);
            out.at(i, o) = acc;
        }
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw KernelError("matmul: inner extents differ");
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = a.at(i, k);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, j) += av * b.at(k, j);
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw KernelError("matmul_tn: inner extents differ");
    Tensor out({a.cols(), b.cols()});
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double av = a.at(k, i);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, j) += av * b.at(k, j);
        }
    }
    return out;
}

void add_row_vector(Tensor& x, const Tensor& v) {
    if (v.numel() != x.cols()) throw KernelError("add_row_vector: extent mismatch");
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) x.at(i, j) += v[j];
    }
}

Tensor column_sums(const Tensor& x) {
    Tensor out({x.cols()});
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x.at(i, j);
    }
    return out;
}

}  // namespace rsit::kernels
