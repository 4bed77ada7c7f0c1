#include "tcqa/tensor.hpp"

#include <cmath>

#include "tcqa/errors.hpp"

namespace tcqa {

std::string shape_string(std::size_t rows, std::size_t cols) {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + tcqa::shape_string(rows, cols));
    }
}

Tensor Tensor::column(std::vector<double> values) {
    auto n = values.size();
    return Tensor(n, 1, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.front().size();
    Tensor t(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c) {
            throw DimensionError("ragged row " + std::to_string(i) + " in matrix literal");
        }
        for (std::size_t j = 0; j < c; ++j) t(i, j) = rows[i][j];
    }
    return t;
}

std::string Tensor::shape_string() const { return tcqa::shape_string(rows_, cols_); }

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace tcqa
