#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sweepaov/errors.hpp"

namespace sweepaov {

using Vector = std::vector<double>;

// Dense real matrix, row-major. Sized for desk-scale designed experiments
// (n up to a few hundred), so no attempt is made at blocking or sparsity.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (!std::isfinite(fill)) throw ValidationError("Matrix: non-finite fill value");
    }

    Matrix(std::size_t rows, std::size_t cols, Vector entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw ValidationError("Matrix: entry count " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_));
        check_finite();
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ValidationError("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        check_finite();
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix ones(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 1.0); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const Vector& data() const { return data_; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Vector column(std::size_t j) const {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    double trace() const {
        if (!square()) throw ValidationError("trace: matrix not square");
        double t = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
        return t;
    }

private:
    void check_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) throw ValidationError("Matrix: non-finite entry");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ValidationError("matrix product: inner dimensions " + std::to_string(a.cols()) +
                              " and " + std::to_string(b.rows()) + " differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Vector operator*(const Matrix& a, const Vector& x) {
    if (a.cols() != x.size()) throw ValidationError("matrix-vector product: dimension mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = s * a(i, j);
    return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ValidationError("matrix sum: shape mismatch");
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
    return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ValidationError("matrix difference: shape mismatch");
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
    return c;
}

// Largest absolute entry; the matrix norm used for all equality checks here.
inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ValidationError("dot: length mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double sum(const Vector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline Vector operator-(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ValidationError("vector difference: length mismatch");
    Vector c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
    return c;
}

inline Vector operator+(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ValidationError("vector sum: length mismatch");
    Vector c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

inline Vector operator*(double s, const Vector& v) {
    Vector c(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) c[i] = s * v[i];
    return c;
}

}  // namespace sweepaov
