#include "bmd/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace bmd {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw std::invalid_argument("ragged row lengths");
        m.set_row(r, rows[r]);
    }
    return m;
}

void Matrix::set_row(std::size_t r, const std::vector<double>& values) {
    if (values.size() != cols_) throw std::invalid_argument("row length mismatch");
    double* dst = row_ptr(r);
    for (std::size_t c = 0; c < cols_; ++c) dst[c] = values[c];
}

bool is_finite(const Matrix& m) {
    for (double v : m.data())
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.empty()) throw std::invalid_argument("empty input");
    if (!is_finite(m)) throw std::domain_error("non-finite input");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* src = m.row_ptr(i);
        double* dst = out.row_ptr(i);
        double mx = src[0];
        for (std::size_t j = 1; j < m.cols(); ++j)
            if (src[j] > mx) mx = src[j];
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        for (std::size_t j = 0; j < m.cols(); ++j) dst[j] /= sum;
    }
    return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* row = out.row_ptr(i);
        double norm = row_norm(row, m.cols());
        if (norm == 0.0) continue;
        for (std::size_t j = 0; j < m.cols(); ++j) row[j] /= norm;
    }
    return out;
}

Matrix pairwise_similarity(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("dimension mismatch");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ra = a.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* rb = b.row_ptr(j);
            double dot = 0.0;
            for (std::size_t c = 0; c < a.cols(); ++c) dot += ra[c] * rb[c];
            out(i, j) = dot;
        }
    }
    return out;
}

std::vector<double> mean_of_rows(const Matrix& m, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("mean of zero rows");

    // Identical rows average to exactly that row. sum/count can otherwise
    // drift a final ulp off the common value ((0.1+0.1+0.1)/3 != 0.1), which
    // breaks zero-inertia and fixed-point guarantees on duplicated data.
    const double* first = m.row_ptr(indices[0]);
    bool uniform = true;
    for (std::size_t i = 1; i < indices.size() && uniform; ++i) {
        const double* row = m.row_ptr(indices[i]);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (row[c] != first[c]) {
                uniform = false;
                break;
            }
        }
    }
    if (uniform) return {first, first + m.cols()};

    std::vector<double> acc(m.cols(), 0.0);
    for (std::size_t idx : indices) {
        const double* row = m.row_ptr(idx);
        for (std::size_t c = 0; c < m.cols(); ++c) acc[c] += row[c];
    }
    const double count = static_cast<double>(indices.size());
    for (double& v : acc) v /= count;
    return acc;
}

double row_norm(const double* row, std::size_t n) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += row[i] * row[i];
    return std::sqrt(sq);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return sq;
}

}  // namespace bmd
