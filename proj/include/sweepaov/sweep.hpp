#pragma once

// Reduced designs, reduced normal equations, residual-operator
// factorizations, and sequential multi-factor sweeps.
//
// The two-stage identity I - P_B - Pt_T = (I - Pt_T)(I - P_B) turns the
// residual operator into a pair of sweeps; for balanced incomplete block
// designs a third, augmented sweep (I - (1/e) P_T) replaces the generalized
// inverse entirely.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sweepaov/errors.hpp"
#include "sweepaov/matrix.hpp"
#include "sweepaov/model.hpp"
#include "sweepaov/spectral.hpp"

namespace sweepaov {

// A design matrix with an earlier model component swept out of its columns:
// Xt = (I - P_prior) X, so that P_prior * Xt = 0.
struct ReducedDesign {
    Matrix matrix;
    Projector prior;
};

struct FitResult {
    std::string label;
    Vector effects;      // solution of the reduced normal equations, centered to sum zero
    Vector fitted;       // projection of the data onto the reduced design space
    double ss_adjusted = 0.0;
    std::size_t df = 0;
};

inline ReducedDesign reduce(const ModelTerm& term, const Projector& prior) {
    const Matrix& x = term.design;
    if (prior.order() != x.rows())
        throw ValidationError("reduce: projector order " + std::to_string(prior.order()) +
                              " does not match design rows " + std::to_string(x.rows()));
    Matrix xt = x - prior.matrix() * x;
    return ReducedDesign{std::move(xt), prior};
}

// Solve the reduced normal equations Xt'Xt tau = Xt'y* by Moore-Penrose
// inversion of Xt'Xt, assembled from the spectrum directly. Effects are
// re-centered to sum zero; df is the numeric rank.
inline FitResult solve_reduced(const ReducedDesign& rd, const Vector& ystar,
                               const Tolerance& tol = {}) {
    const Matrix& xt = rd.matrix;
    if (ystar.size() != xt.rows())
        throw ValidationError("solve_reduced: response length does not match design");

    const std::size_t p = xt.cols();
    const Matrix xtt = xt.transposed();
    const Matrix gram = xtt * xt;
    const SymmetricEigen eig = eigh(gram, tol);
    const std::size_t df = numeric_rank(eig, tol);

    double lam_max = 0.0;
    for (double lam : eig.values) lam_max = std::max(lam_max, std::abs(lam));
    const double cut = tol.rel_eps * std::max(1.0, lam_max);

    const Vector rhs = xtt * ystar;
    Vector effects(p, 0.0);
    for (std::size_t k = 0; k < p; ++k) {
        const double lam = eig.values[k];
        if (std::abs(lam) <= cut) continue;
        double proj = 0.0;
        for (std::size_t j = 0; j < p; ++j) proj += eig.vectors(j, k) * rhs[j];
        const double coeff = proj / lam;
        for (std::size_t j = 0; j < p; ++j) effects[j] += coeff * eig.vectors(j, k);
    }

    Vector fitted = xt * effects;
    double ss = dot(ystar, fitted);
    if (ss < 0.0) {
        if (ss < -tol.abs_eps)
            throw NumericError("solve_reduced: negative adjusted sum of squares " +
                               std::to_string(ss));
        ss = 0.0;
    }

    // The Moore-Penrose solution is already orthogonal to the kernel; the
    // re-centering is a no-op for connected designs but pins the reporting
    // convention 1'tau = 0 regardless.
    const double mean = sum(effects) / static_cast<double>(p);
    for (double& e : effects) e -= mean;

    return FitResult{"", std::move(effects), std::move(fitted), ss, df};
}

// R = I - P_B - Pt_T, validated against its sweep factorization
// (I - Pt_T)(I - P_B) before being returned.
inline Matrix residual_operator(const Projector& p_b, const Projector& pt_t,
                                const Tolerance& tol = {}) {
    if (p_b.order() != pt_t.order())
        throw ValidationError("residual_operator: projector orders differ");
    if (max_abs(pt_t.matrix() * p_b.matrix()) > tol.abs_eps)
        throw ValidationError(
            "residual_operator: components not orthogonal (Pt_T * P_B != 0); "
            "the treatment projector must be reduced by blocks first");

    const Matrix identity = Matrix::identity(p_b.order());
    Matrix r = identity - p_b.matrix() - pt_t.matrix();
    const Matrix factored = (identity - pt_t.matrix()) * (identity - p_b.matrix());
    const double dev = max_abs(r - factored);
    if (dev > tol.abs_eps)
        throw NumericError("residual_operator: factorization defect " + std::to_string(dev));
    return r;
}

// Three-stage residual sweep for a BIB design with efficiency factor e:
// (I - P_B)(I - (1/e) P_T)(I - P_B) y. The caller is responsible for having
// established that the design is balanced; for e = 1 the operator degenerates
// to the plain sweep sequence of a complete block design.
inline Vector bib_three_stage(const Projector& p_b, const Projector& p_t, double e,
                              const Vector& y, const Tolerance& tol = {}) {
    if (p_b.order() != p_t.order())
        throw ValidationError("bib_three_stage: projector orders differ");
    if (y.size() != p_b.order()) throw ValidationError("bib_three_stage: response length mismatch");
    if (!(e > 0.0) || e > 1.0 + tol.abs_eps)
        throw ValidationError("bib_three_stage: efficiency factor " + std::to_string(e) +
                              " outside (0, 1]");

    Vector stage1 = p_b.sweep(y);
    Vector pt_stage1 = p_t.apply(stage1);
    Vector stage2(stage1.size());
    for (std::size_t i = 0; i < stage1.size(); ++i)
        stage2[i] = stage1[i] - pt_stage1[i] / e;
    return p_b.sweep(stage2);
}

struct SweepOutcome {
    std::vector<FitResult> terms;
    std::vector<Projector> adjusted;  // adjusted projector of each term, same order
    Vector residual;
    double residual_ss = 0.0;
    std::size_t residual_df = 0;
    double total_ss = 0.0;  // mean-corrected total, ystar'ystar
};

// Sequential (Type-I) sweep: each term is adjusted for the grand mean and for
// every term listed before it. Sums of squares and ranks therefore depend on
// the term order; re-run with terms permuted for the other decomposition.
inline SweepOutcome sequential_sweep(const std::vector<ModelTerm>& terms, const Vector& ystar,
                                     const Tolerance& tol = {}) {
    if (terms.empty()) throw ValidationError("sequential_sweep: no terms");
    const std::size_t n = ystar.size();
    if (n == 0) throw ValidationError("sequential_sweep: empty response");
    for (const auto& t : terms)
        if (t.design.rows() != n)
            throw ValidationError("sequential_sweep: term " + t.factor_name +
                                  " has wrong unit count");
    if (std::abs(sum(ystar)) > tol.abs_eps * static_cast<double>(n) * std::max(1.0, max_abs(ystar)))
        throw ValidationError("sequential_sweep: response is not mean-centered");

    SweepOutcome out;
    out.total_ss = dot(ystar, ystar);

    Projector accumulated = grand_mean_projector(n);
    for (const auto& term : terms) {
        const ReducedDesign rd = reduce(term, accumulated);
        FitResult fit = solve_reduced(rd, ystar, tol);
        fit.label = term.factor_name;

        Projector adjusted =
            fit.df > 0 ? projector_from_design(rd.matrix, tol) : Projector::zero(n);
        out.adjusted.push_back(adjusted);
        out.terms.push_back(std::move(fit));
        accumulated = Projector::adopt(accumulated.matrix() + adjusted.matrix(), tol);
    }

    Vector residual = ystar;
    for (const auto& fit : out.terms) residual = residual - fit.fitted;
    out.residual = residual;
    out.residual_ss = dot(residual, residual);

    const Projector residual_proj =
        Projector::adopt(Matrix::identity(n) - accumulated.matrix(), tol);
    out.residual_df = residual_proj.rank();

    double explained = 0.0;
    for (const auto& fit : out.terms) explained += fit.ss_adjusted;
    const double defect = std::abs(out.total_ss - explained - out.residual_ss);
    if (defect > tol.abs_eps * std::max(1.0, out.total_ss))
        throw NumericError("sequential_sweep: sum-of-squares decomposition defect " +
                           std::to_string(defect));
    return out;
}

}  // namespace sweepaov
