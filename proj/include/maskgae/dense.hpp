#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskgae::num {

// Row-major dense matrix with 32-bit float storage. Reductions over entries
// (dot products, batch statistics) accumulate in 64-bit.
struct DenseMatrix {
    std::int64_t rows{0};
    std::int64_t cols{0};
    std::vector<float> data;

    DenseMatrix() = default;
    DenseMatrix(std::int64_t r, std::int64_t c, float fill = 0.0f)
        : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("DenseMatrix: negative shape");
    }

    static DenseMatrix zeros(std::int64_t r, std::int64_t c) { return DenseMatrix(r, c, 0.0f); }

    float& operator()(std::int64_t i, std::int64_t j) {
        return data[static_cast<std::size_t>(i * cols + j)];
    }
    float operator()(std::int64_t i, std::int64_t j) const {
        return data[static_cast<std::size_t>(i * cols + j)];
    }

    float* row_ptr(std::int64_t i) { return data.data() + i * cols; }
    const float* row_ptr(std::int64_t i) const { return data.data() + i * cols; }

    std::int64_t size() const { return rows * cols; }

    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

// Sparse matrix in CSR form. Used for propagation matrices and sparse feature
// inputs; never differentiated.
struct SparseMatrix {
    std::int64_t rows{0};
    std::int64_t cols{0};
    std::vector<std::int64_t> offsets;   // size rows + 1, non-decreasing
    std::vector<std::int32_t> col_idx;   // size nnz
    std::vector<float> values;           // size nnz

    std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }

    // Dense copy, mostly for small-scale oracle checks.
    DenseMatrix to_dense() const {
        DenseMatrix d(rows, cols);
        for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t p = offsets[i]; p < offsets[i + 1]; ++p)
                d(i, col_idx[p]) += values[p];
        return d;
    }

    // Builds a CSR matrix from a dense one, keeping entries with |x| > 0.
    static SparseMatrix from_dense(const DenseMatrix& d) {
        SparseMatrix s;
        s.rows = d.rows;
        s.cols = d.cols;
        s.offsets.assign(static_cast<std::size_t>(d.rows) + 1, 0);
        for (std::int64_t i = 0; i < d.rows; ++i) {
            for (std::int64_t j = 0; j < d.cols; ++j) {
                if (d(i, j) != 0.0f) {
                    s.col_idx.push_back(static_cast<std::int32_t>(j));
                    s.values.push_back(d(i, j));
                }
            }
            s.offsets[static_cast<std::size_t>(i) + 1] =
                static_cast<std::int64_t>(s.values.size());
        }
        return s;
    }
};

} // namespace maskgae::num
