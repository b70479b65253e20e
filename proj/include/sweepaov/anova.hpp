#pragma once

// ANOVA table assembly: mean squares, variance ratios, and central-F upper
// tail probabilities via the regularized incomplete beta function.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sweepaov/errors.hpp"
#include "sweepaov/spectral.hpp"
#include "sweepaov/sweep.hpp"

namespace sweepaov {

struct AnovaRow {
    std::string source;
    std::size_t df = 0;
    double ss = 0.0;
    std::optional<double> ms;
    std::optional<double> f;
    std::optional<double> p;
};

struct AnovaStratum {
    std::string label;
    std::vector<AnovaRow> rows;
};

struct AnovaTable {
    std::vector<AnovaStratum> strata;
    AnovaRow total;  // grand total, mean-corrected: df n-1
    std::vector<std::string> diagnostics;
};

inline double residual_mean_square(double rss, std::size_t df) {
    if (df == 0) throw ValidationError("residual_mean_square: zero degrees of freedom");
    return rss / static_cast<double>(df);
}

inline double variance_ratio(double model_ss, std::size_t model_df, double s2) {
    if (model_df == 0) throw ValidationError("variance_ratio: zero model degrees of freedom");
    if (!(s2 > 0.0)) throw ValidationError("variance_ratio: residual variance is zero");
    return (model_ss / static_cast<double>(model_df)) / s2;
}

namespace detail {

// Continued fraction for the regularized incomplete beta, evaluated with the
// modified Lentz algorithm: 1e-12 convergence, 300-term cap.
inline double ibeta_continued_fraction(double x, double a, double b) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-12;
    constexpr int max_iter = 300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;

    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;

    int m = 1;
    for (; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    if (m > max_iter)
        throw NumericError("regularized_incomplete_beta: continued fraction did not converge");
    return h;
}

}  // namespace detail

// I_x(a, b), the regularized incomplete beta function.
inline double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0))
        throw ValidationError("regularized_incomplete_beta: parameters must be positive");
    if (x < 0.0 || x > 1.0) throw ValidationError("regularized_incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
        b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::ibeta_continued_fraction(x, a, b) / a;
    return 1.0 - front * detail::ibeta_continued_fraction(1.0 - x, b, a) / b;
}

// P(F(d1, d2) > f) for the central F distribution.
inline double f_upper_tail(double f, std::size_t d1, std::size_t d2) {
    if (d1 < 1 || d2 < 1) throw ValidationError("f_upper_tail: degrees of freedom must be >= 1");
    if (f < 0.0) throw ValidationError("f_upper_tail: variance ratio must be nonnegative");
    if (f == 0.0) return 1.0;
    const double dd1 = static_cast<double>(d1);
    const double dd2 = static_cast<double>(d2);
    const double x = dd2 / (dd2 + dd1 * f);
    const double p = regularized_incomplete_beta(x, dd2 / 2.0, dd1 / 2.0);
    return std::min(1.0, std::max(0.0, p));
}

// E[y' P* y] = pi'X'P*X pi + rank(P*) sigma^2 for a symmetric idempotent P*.
inline double expected_ss(const Projector& pstar, const Matrix& x, const Vector& pi,
                          double sigma2) {
    if (pstar.order() != x.rows()) throw ValidationError("expected_ss: projector order mismatch");
    if (x.cols() != pi.size()) throw ValidationError("expected_ss: parameter length mismatch");
    const Vector xpi = x * pi;
    const double quad = dot(xpi, pstar.matrix() * xpi);
    return quad + static_cast<double>(pstar.rank()) * sigma2;
}

enum class TableLayout {
    OneFactor,        // single treatment factor, units stratum
    BlockTwoFactor,   // blocks stratum + blocks.plots stratum
    MultiFactor,      // three or more sequential factors, units stratum
};

// Assemble the ANOVA table from a sequential sweep. Sums of squares are
// sequential (first term ignoring later ones, later terms adjusted); degrees
// of freedom come from numeric ranks. F ratios and p-values go on every
// non-residual row of the final stratum, unless the residual variance is
// zero or the design is disconnected.
inline AnovaTable build_table(TableLayout layout, const SweepOutcome& sweep, std::size_t n,
                              bool connected = true, const Tolerance& tol = {}) {
    AnovaTable table;

    std::size_t df_total = sweep.residual_df;
    double ss_total = sweep.residual_ss;
    for (const auto& fit : sweep.terms) {
        df_total += fit.df;
        ss_total += fit.ss_adjusted;
    }
    if (df_total != n - 1)
        throw NumericError("build_table: degrees of freedom sum to " + std::to_string(df_total) +
                           ", expected " + std::to_string(n - 1));
    const double ss_defect = std::abs(ss_total - sweep.total_ss);
    if (ss_defect > std::max(tol.abs_eps, 1e-8 * sweep.total_ss))
        throw NumericError("build_table: sum-of-squares additivity defect " +
                           std::to_string(ss_defect));

    const bool residual_usable =
        sweep.residual_df >= 1 &&
        sweep.residual_ss > tol.abs_eps * std::max(1.0, sweep.total_ss);
    double s2 = 0.0;
    if (sweep.residual_df >= 1) s2 = residual_mean_square(sweep.residual_ss, sweep.residual_df);

    if (sweep.residual_df == 0)
        table.diagnostics.push_back("zero residual degrees of freedom: F and p omitted");
    else if (!residual_usable)
        table.diagnostics.push_back("residual variance is zero: F and p omitted");
    if (!connected)
        table.diagnostics.push_back("design is disconnected: p-values refused");

    auto clamp_ss = [&](double ss, const std::string& source) {
        if (ss >= 0.0) return ss;
        if (ss < -std::max(tol.abs_eps, 1e-8 * std::max(1.0, sweep.total_ss)))
            throw NumericError("build_table: negative sum of squares for " + source);
        table.diagnostics.push_back("clamped tiny negative sum of squares for " + source);
        return 0.0;
    };

    auto make_row = [&](const FitResult& fit, const std::string& source, bool with_f) {
        AnovaRow row;
        row.source = source;
        row.df = fit.df;
        row.ss = clamp_ss(fit.ss_adjusted, source);
        if (fit.df > 0) row.ms = row.ss / static_cast<double>(fit.df);
        if (with_f && residual_usable && connected && fit.df > 0) {
            row.f = variance_ratio(row.ss, fit.df, s2);
            row.p = f_upper_tail(*row.f, fit.df, sweep.residual_df);
        }
        return row;
    };

    AnovaRow residual_row;
    residual_row.source = "Residual";
    residual_row.df = sweep.residual_df;
    residual_row.ss = clamp_ss(sweep.residual_ss, "Residual");
    if (sweep.residual_df > 0) residual_row.ms = s2;

    switch (layout) {
        case TableLayout::OneFactor: {
            if (sweep.terms.size() != 1)
                throw ValidationError("build_table: one-factor layout needs exactly one term");
            AnovaStratum units{"Units stratum", {}};
            units.rows.push_back(make_row(sweep.terms[0], sweep.terms[0].label, true));
            units.rows.push_back(residual_row);
            table.strata.push_back(std::move(units));
            break;
        }
        case TableLayout::BlockTwoFactor: {
            if (sweep.terms.size() != 2)
                throw ValidationError("build_table: block layout needs exactly two terms");
            AnovaStratum blocks{"Blocks stratum", {}};
            blocks.rows.push_back(make_row(sweep.terms[0], sweep.terms[0].label, false));
            AnovaStratum plots{"Blocks.plots stratum", {}};
            plots.rows.push_back(make_row(sweep.terms[1], sweep.terms[1].label + " (adj.)", true));
            plots.rows.push_back(residual_row);
            table.strata.push_back(std::move(blocks));
            table.strata.push_back(std::move(plots));
            break;
        }
        case TableLayout::MultiFactor: {
            AnovaStratum units{"Units stratum", {}};
            for (std::size_t i = 0; i < sweep.terms.size(); ++i) {
                const std::string source =
                    i == 0 ? sweep.terms[i].label : sweep.terms[i].label + " (adj.)";
                units.rows.push_back(make_row(sweep.terms[i], source, true));
            }
            units.rows.push_back(residual_row);
            table.strata.push_back(std::move(units));
            break;
        }
    }

    table.total.source = "Grand Total";
    table.total.df = n - 1;
    table.total.ss = sweep.total_ss;
    return table;
}

}  // namespace sweepaov
