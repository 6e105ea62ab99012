#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedmfs {

/// Minimal dense row-major matrix.
template <typename T>
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const T> row(std::size_t r) const {
        return std::span<const T>(data_.data() + r * cols_, cols_);
    }
    std::span<T> row(std::size_t r) {
        return std::span<T>(data_.data() + r * cols_, cols_);
    }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using FloatMatrix = DenseMatrix<float>;

}  // namespace fedmfs
