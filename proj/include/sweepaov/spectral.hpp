#pragma once

// Symmetric-matrix spectral machinery: Jacobi eigendecomposition, numeric
// rank, Moore-Penrose inversion, and orthogonal projectors built from design
// matrices. Everything downstream (sweeps, ANOVA, efficiency factors) reduces
// to these operations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sweepaov/errors.hpp"
#include "sweepaov/matrix.hpp"

namespace sweepaov {

struct Tolerance {
    double rel_eps = 1e-10;  // eigenvalues below rel_eps * max(1, max|lambda|) count as zero
    double abs_eps = 1e-8;   // absolute threshold for matrix equality checks

    Tolerance() = default;
    Tolerance(double rel, double abs) : rel_eps(rel), abs_eps(abs) {
        if (!(rel_eps > 0.0) || !(abs_eps > 0.0))
            throw ValidationError("Tolerance: thresholds must be strictly positive");
    }
};

// Eigenvalues sorted descending; column i of `vectors` is the unit eigenvector
// of values[i]. Within a numerically degenerate cluster the basis is an
// arbitrary orthonormal one, so callers must only rely on spans there.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

namespace detail {

inline void require_square(const Matrix& h, const char* who) {
    if (!h.square()) throw ValidationError(std::string(who) + ": matrix not square");
}

inline double asymmetry(const Matrix& h) {
    double m = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = i + 1; j < h.cols(); ++j)
            m = std::max(m, std::abs(h(i, j) - h(j, i)));
    return m;
}

inline Matrix symmetrized(const Matrix& h) {
    Matrix s(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) s(i, j) = 0.5 * (h(i, j) + h(j, i));
    return s;
}

inline double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Input asymmetry up
// to abs_eps is repaired by averaging with the transpose; more than that is
// rejected. Sweeps run until the off-diagonal Frobenius mass reaches the
// roundoff floor (or stops shrinking there), at most 100 sweeps. Full
// machine-precision convergence keeps downstream pseudo-inverses accurate
// even when small nonzero eigenvalues get inverted; rel_eps plays no role
// here, it only decides rank.
inline SymmetricEigen eigh(const Matrix& h, const Tolerance& tol = {}) {
    detail::require_square(h, "eigh");
    if (detail::asymmetry(h) > tol.abs_eps)
        throw ValidationError("eigh: input asymmetry exceeds tolerance");

    const std::size_t n = h.rows();
    Matrix a = detail::symmetrized(h);
    Matrix v = Matrix::identity(n);
    const double frob = frobenius_norm(a);
    const double target =
        static_cast<double>(n) * std::numeric_limits<double>::epsilon() * frob;

    const int max_sweeps = 100;
    double prev_off = std::numeric_limits<double>::infinity();
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        const double off = detail::off_diagonal_norm(a);
        if (off <= target) break;
        if (off >= prev_off && off <= tol.rel_eps * frob) break;  // stalled at roundoff
        prev_off = off;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (sweep == max_sweeps && detail::off_diagonal_norm(a) > tol.rel_eps * frob)
        throw NumericError("eigh: Jacobi iteration did not converge in 100 sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymmetricEigen eig;
    eig.values.resize(n);
    eig.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        eig.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) eig.vectors(i, j) = v(i, order[j]);
    }
    return eig;
}

// Count of eigenvalues treated as nonzero under the relative threshold.
inline std::size_t numeric_rank(const SymmetricEigen& eig, const Tolerance& tol = {}) {
    double lam_max = 0.0;
    for (double lam : eig.values) lam_max = std::max(lam_max, std::abs(lam));
    const double cut = tol.rel_eps * std::max(1.0, lam_max);
    std::size_t r = 0;
    for (double lam : eig.values)
        if (std::abs(lam) > cut) ++r;
    return r;
}

// Moore-Penrose inverse of a symmetric matrix: invert the nonzero part of the
// spectrum and leave the kernel alone.
inline Matrix moore_penrose(const Matrix& h, const Tolerance& tol = {}) {
    const SymmetricEigen eig = eigh(h, tol);
    const std::size_t n = h.rows();
    double lam_max = 0.0;
    for (double lam : eig.values) lam_max = std::max(lam_max, std::abs(lam));
    const double cut = tol.rel_eps * std::max(1.0, lam_max);

    Matrix pinv(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = eig.values[k];
        if (std::abs(lam) <= cut) continue;
        const double inv = 1.0 / lam;
        for (std::size_t i = 0; i < n; ++i) {
            const double gik = eig.vectors(i, k);
            if (gik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) pinv(i, j) += inv * gik * eig.vectors(j, k);
        }
    }
    return detail::symmetrized(pinv);
}

// Symmetric idempotent matrix together with its rank. Stored exactly
// symmetric; idempotency and trace-equals-rank are enforced at construction.
class Projector {
public:
    Projector() = default;

    static Projector zero(std::size_t n) {
        Projector p;
        p.matrix_ = Matrix(n, n);
        p.rank_ = 0;
        return p;
    }

    static Projector identity(std::size_t n) {
        Projector p;
        p.matrix_ = Matrix::identity(n);
        p.rank_ = n;
        return p;
    }

    // Validates and adopts a candidate projection matrix. The rank is read
    // off the trace: latent roots of an idempotent matrix are 0 or 1, so the
    // trace must sit next to an integer.
    static Projector adopt(const Matrix& m, const Tolerance& tol = {}) {
        detail::require_square(m, "Projector");
        Matrix s = detail::symmetrized(m);
        const double idem = max_abs(s * s - s);
        if (idem > tol.abs_eps)
            throw NumericError("Projector: idempotency defect " + std::to_string(idem));
        const double tr = s.trace();
        const double rounded = std::round(tr);
        if (std::abs(tr - rounded) > 1e-6 || rounded < 0.0)
            throw NumericError("Projector: trace " + std::to_string(tr) +
                               " is not close to a nonnegative integer");
        Projector p;
        p.matrix_ = std::move(s);
        p.rank_ = static_cast<std::size_t>(rounded);
        return p;
    }

    const Matrix& matrix() const { return matrix_; }
    std::size_t rank() const { return rank_; }
    std::size_t order() const { return matrix_.rows(); }

    Vector apply(const Vector& y) const { return matrix_ * y; }

    // I - P applied to a vector: the sweep operator of this projector.
    Vector sweep(const Vector& y) const {
        Vector fitted = matrix_ * y;
        Vector out(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - fitted[i];
        return out;
    }

    Matrix complement() const { return Matrix::identity(order()) - matrix_; }

private:
    Matrix matrix_;
    std::size_t rank_ = 0;
};

// Orthogonal projector onto the column space of a design matrix:
// P = X (X'X)^+ X'. Any generalized inverse of X'X yields the same P; the
// Moore-Penrose choice is used throughout.
inline Projector projector_from_design(const Matrix& x, const Tolerance& tol = {}) {
    if (x.rows() == 0 || x.cols() == 0)
        throw ValidationError("projector_from_design: empty design matrix");
    const Matrix xt = x.transposed();
    const Matrix xtx = xt * x;
    const SymmetricEigen eig = eigh(xtx, tol);
    const std::size_t rank = numeric_rank(eig, tol);

    double lam_max = 0.0;
    for (double lam : eig.values) lam_max = std::max(lam_max, std::abs(lam));
    const double cut = tol.rel_eps * std::max(1.0, lam_max);

    // P = sum over nonzero roots of (X g_k)(X g_k)' / lambda_k, which is
    // X (X'X)^+ X' assembled without forming the pseudo-inverse.
    const std::size_t n = x.rows();
    Matrix p(n, n);
    for (std::size_t k = 0; k < eig.values.size(); ++k) {
        const double lam = eig.values[k];
        if (std::abs(lam) <= cut) continue;
        Vector xg(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j) * eig.vectors(j, k);
            xg[i] = s;
        }
        const double inv = 1.0 / lam;
        for (std::size_t i = 0; i < n; ++i) {
            if (xg[i] == 0.0) continue;
            const double w = inv * xg[i];
            for (std::size_t j = 0; j < n; ++j) p(i, j) += w * xg[j];
        }
    }

    Matrix ps = detail::symmetrized(p);
    const double idem = max_abs(ps * ps - ps);
    if (idem > tol.abs_eps)
        throw NumericError("projector_from_design: idempotency defect " + std::to_string(idem));
    if (std::abs(ps.trace() - static_cast<double>(rank)) > 1e-6)
        throw NumericError("projector_from_design: trace disagrees with rank");

    // adopt() re-derives the rank from the trace, which agrees (checked above).
    return Projector::adopt(ps, tol);
}

// Excess variance of an arbitrary unbiased linear estimator over the least
// squares one, for the estimable function gamma'X pi. L = GX' + M(I - P)
// satisfies XLX = X by construction; the returned quantity
// gamma'(XL)(XL)'gamma - gamma'P gamma is a sum of squares and hence >= 0.
inline double gauss_markov_excess(const Matrix& x, const Matrix& m, const Vector& gamma,
                                  const Tolerance& tol = {}) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (m.rows() != p || m.cols() != n)
        throw ValidationError("gauss_markov_excess: M must be p x n");
    if (gamma.size() != n)
        throw ValidationError("gauss_markov_excess: gamma must have length n");

    const Projector proj = projector_from_design(x, tol);

    // XL = XGX' + XM(I-P) = P + XM(I-P)
    const Matrix xl = proj.matrix() + (x * m) * proj.complement();
    Vector xlt_gamma = xl.transposed() * gamma;
    const double var_linear = dot(xlt_gamma, xlt_gamma);
    const double var_ls = dot(gamma, proj.matrix() * gamma);
    return var_linear - var_ls;
}

}  // namespace sweepaov
