#pragma once

#include <cstddef>
#include <vector>

namespace bmd {

/// Dense row-major matrix of doubles. All library math runs on this type;
/// summations are plain left-to-right loops so results are reproducible
/// bit-for-bit across runs.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double> row_copy(std::size_t r) const {
        return {row_ptr(r), row_ptr(r) + cols_};
    }
    void set_row(std::size_t r, const std::vector<double>& values);
    void set_row(std::size_t r, const double* values) {
        double* dst = row_ptr(r);
        for (std::size_t c = 0; c < cols_; ++c) dst[c] = values[c];
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// True when every entry is finite (no NaN/Inf).
bool is_finite(const Matrix& m);

/// Row-wise softmax with max-subtraction. Throws on empty or non-finite input.
Matrix softmax_rows(const Matrix& m);

/// Scales each row to unit Euclidean norm; zero rows pass through unchanged.
Matrix l2_normalize_rows(const Matrix& m);

/// Dot products between all rows of a and all rows of b: out(i,j) = a_i . b_j.
/// Requires a.cols() == b.cols().
Matrix pairwise_similarity(const Matrix& a, const Matrix& b);

/// Mean of the selected rows, accumulated in the order given then divided by
/// the count; bitwise-identical rows yield exactly that row. Callers that
/// must agree bitwise route through this helper.
std::vector<double> mean_of_rows(const Matrix& m, const std::vector<std::size_t>& indices);

/// Euclidean norm of a row vector.
double row_norm(const double* row, std::size_t n);

inline double row_norm(const Matrix& m, std::size_t r) { return row_norm(m.row_ptr(r), m.cols()); }

/// Squared Euclidean distance between two rows of equal length.
double squared_distance(const double* a, const double* b, std::size_t n);

}  // namespace bmd
