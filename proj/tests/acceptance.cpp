// Acceptance suite: one line per criterion, PASS/FAIL, nonzero exit when
// anything fails. Tolerances are fixed here, in code.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sweepaov/anova.hpp"
#include "sweepaov/block_design.hpp"
#include "sweepaov/model.hpp"
#include "sweepaov/report.hpp"
#include "sweepaov/spectral.hpp"
#include "sweepaov/sweep.hpp"

using namespace sweepaov;

namespace {

int g_failures = 0;

void report(int num, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", num, name.c_str(),
                detail.c_str());
    if (!pass) ++g_failures;
}

std::string dev_str(double dev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max dev %.3g", dev);
    return buf;
}

struct DesignTerms {
    ModelTerm blocks;
    ModelTerm treatments;
    Projector p_b;
    Projector pt_t;  // treatments adjusted for blocks
};

DesignTerms terms_of(const BlockDesign& d) {
    DesignTerms t{indicator_matrix(d.block_factor(), d.n()),
                  indicator_matrix(d.treatment_factor(), d.n()), Projector{}, Projector{}};
    t.p_b = projector_from_design(t.blocks.design);
    t.pt_t = projector_from_design(reduce(t.treatments, t.p_b).matrix);
    return t;
}

void criterion_1_information_matrix() {
    const Matrix a = information_matrix(fixtures::ibd_4x2());
    const Matrix expected = 0.25 * Matrix({{2.0, 0.0, -1.0, -1.0},
                                           {0.0, 2.0, -1.0, -1.0},
                                           {-1.0, -1.0, 2.0, 0.0},
                                           {-1.0, -1.0, 0.0, 2.0}});
    const double dev = max_abs(a - expected);
    report(1, "information matrix entrywise exact", dev <= 1e-12, dev_str(dev));
}

void criterion_2_cefs() {
    const EfficiencyReport rep =
        canonical_efficiency_factors(information_matrix(fixtures::ibd_4x2()));
    double dev = std::abs(rep.cefs[0] - 1.0);
    dev = std::max(dev, std::abs(rep.cefs[1] - 0.5));
    dev = std::max(dev, std::abs(rep.cefs[2] - 0.5));

    // Span check: each stated contrast must be fixed by the projector of its
    // own eigenspace (cef 1 is simple, cef 1/2 has a 2-dimensional space).
    const std::vector<std::pair<Vector, std::vector<std::size_t>>> cases = {
        {{0.5, 0.5, -0.5, -0.5}, {0}},
        {{0.5, -0.5, 0.5, -0.5}, {1, 2}},
        {{0.5, -0.5, -0.5, 0.5}, {1, 2}},
    };
    for (const auto& [c, cols] : cases) {
        Vector projected(4, 0.0);
        for (std::size_t col : cols) {
            const Vector eta = rep.contrast_basis.column(col);
            const double coeff = dot(eta, c);
            for (std::size_t i = 0; i < 4; ++i) projected[i] += coeff * eta[i];
        }
        dev = std::max(dev, max_abs(projected - c));
    }
    report(2, "canonical efficiency factors {1, 1/2, 1/2} with stated eigenspaces",
           dev <= 1e-10, dev_str(dev));
}

void criterion_3_contrast_efficiency() {
    const double e =
        contrast_efficiency({1.0, -1.0, -1.0, 1.0}, information_matrix(fixtures::ibd_4x2()));
    const double dev = std::abs(e - 0.5);
    report(3, "contrast (1,-1,-1,1) has efficiency 1/2", dev <= 1e-12, dev_str(dev));
}

void criterion_4_bib_closed_form() {
    const BlockDesign d = fixtures::bib_7x3();
    const BibResult bib = is_bib(d);
    const EfficiencyReport rep = efficiency_report(d);
    double dev = 0.0;
    for (double e : rep.cefs) dev = std::max(dev, std::abs(e - 7.0 / 9.0));
    dev = std::max(dev, std::abs(rep.harmonic_mean - 7.0 / 9.0));
    const bool pass = bib.is_bib && bib.lambda == 1 && rep.cefs.size() == 6 && dev <= 1e-10;
    report(4, "BIB recognized (lambda=1) with all cefs and E equal to 7/9", pass, dev_str(dev));
}

void criterion_5_three_stage() {
    const BlockDesign d = fixtures::bib_7x3();
    const DesignTerms t = terms_of(d);
    const Projector p_t = projector_from_design(t.treatments.design);

    std::mt19937_64 rng(2001);
    double dev = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Vector y = fixtures::random_vector(rng, d.n(), 2.0);
        const Vector three = bib_three_stage(t.p_b, p_t, 7.0 / 9.0, y);
        const Vector two = t.pt_t.sweep(t.p_b.sweep(y));
        dev = std::max(dev, max_abs(three - two));
    }
    report(5, "three-stage sweep equals two-stage residual on 100 responses", dev <= 1e-9,
           dev_str(dev));
}

void criterion_6_two_stage() {
    std::mt19937_64 rng(2002);
    double dev = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const BlockDesign d = fixtures::random_connected_design(rng);
        const DesignTerms t = terms_of(d);
        const Matrix identity = Matrix::identity(d.n());
        const Matrix direct = identity - t.p_b.matrix() - t.pt_t.matrix();
        const Matrix staged = (identity - t.pt_t.matrix()) * (identity - t.p_b.matrix());
        dev = std::max(dev, max_abs(direct - staged));
    }
    report(6, "two-stage factorization on 50 random connected designs", dev <= 1e-9,
           dev_str(dev));
}

void criterion_7_oracle_effects() {
    std::mt19937_64 rng(2003);
    double dev = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const BlockDesign d = fixtures::random_connected_design(rng);
        const DesignTerms t = terms_of(d);
        const Vector ystar = sweep_mean(fixtures::random_vector(rng, d.n(), 3.0));
        const FitResult fit = solve_reduced(reduce(t.treatments, t.p_b), ystar);
        const Vector oracle = oracles::stacked_effects({t.blocks, t.treatments}, ystar, 1);
        dev = std::max(dev, max_abs(fit.effects - oracle));
    }
    report(7, "reduced-equation effects match the stacked-system oracle", dev <= 1e-8,
           dev_str(dev));
}

void criterion_8_additivity() {
    std::mt19937_64 rng(2004);
    bool df_ok = true;
    double rel_dev = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const BlockDesign d =
            trial == 0 ? fixtures::ibd_4x2()
                       : (trial == 1 ? fixtures::bib_7x3() : fixtures::random_connected_design(rng));
        const ModelTerm blocks = indicator_matrix(d.block_factor(), d.n());
        const ModelTerm treatments = indicator_matrix(d.treatment_factor(), d.n());
        const Vector ystar = sweep_mean(fixtures::random_vector(rng, d.n(), 2.0));
        const SweepOutcome outcome = sequential_sweep({blocks, treatments}, ystar);

        std::size_t df_sum = outcome.residual_df;
        double ss_sum = outcome.residual_ss;
        for (const auto& fit : outcome.terms) {
            df_sum += fit.df;
            ss_sum += fit.ss_adjusted;
        }
        if (df_sum != d.n() - 1) df_ok = false;
        rel_dev = std::max(rel_dev, std::abs(ss_sum - outcome.total_ss) / outcome.total_ss);
    }
    report(8, "ANOVA df and SS additivity on every analysis", df_ok && rel_dev <= 1e-8,
           df_ok ? dev_str(rel_dev) : "df mismatch");
}

void criterion_9_projector_laws() {
    std::mt19937_64 rng(2005);
    double dev = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng() % 17;
        const std::size_t p = 2 + rng() % 5;
        const Matrix ind = fixtures::random_indicator(rng, n, std::min(p, n - 1));

        // Half the cases rank-deficient: prepend the all-ones column.
        Matrix x;
        if (trial % 2 == 0) {
            x = Matrix(n, ind.cols() + 1);
            for (std::size_t i = 0; i < n; ++i) {
                x(i, 0) = 1.0;
                for (std::size_t j = 0; j < ind.cols(); ++j) x(i, j + 1) = ind(i, j);
            }
        } else {
            x = ind;
        }

        const Projector proj = projector_from_design(x);
        const Matrix& pm = proj.matrix();
        dev = std::max(dev, max_abs(pm * pm - pm));
        dev = std::max(dev, max_abs(pm - pm.transposed()));
        dev = std::max(dev, std::abs(pm.trace() - static_cast<double>(proj.rank())));

        const Matrix xt = x.transposed();
        const Matrix gram = xt * x;
        const Matrix g = moore_penrose(gram);
        dev = std::max(dev, max_abs(x * g * xt * x - x));  // XGX'X = X

        // Another generalized inverse from a kernel perturbation leaves P
        // unchanged (trivially so for full-rank X, where the kernel is 0).
        const SymmetricEigen eig = eigh(gram);
        if (numeric_rank(eig) < gram.rows()) {
            const Vector w = eig.vectors.column(gram.rows() - 1);
            const Vector z = fixtures::random_vector(rng, gram.rows());
            Matrix gstar = g;
            for (std::size_t i = 0; i < gram.rows(); ++i)
                for (std::size_t j = 0; j < gram.rows(); ++j)
                    gstar(i, j) += w[i] * z[j] + z[i] * w[j];
            dev = std::max(dev, max_abs(x * g * xt - x * gstar * xt));
        }
    }
    report(9, "projector laws over 200 random design matrices", dev <= 1e-9, dev_str(dev));
}

void criterion_10_moore_penrose() {
    std::mt19937_64 rng(2006);
    double dev = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 11;
        const Matrix h = fixtures::random_symmetric_ranked(rng, n);
        const Matrix hp = moore_penrose(h);
        dev = std::max(dev, max_abs(h * hp * h - h));
        dev = std::max(dev, max_abs(hp * h * hp - hp));
        const Matrix hhp = h * hp;
        const Matrix hph = hp * h;
        dev = std::max(dev, max_abs(hhp - hhp.transposed()));
        dev = std::max(dev, max_abs(hph - hph.transposed()));
    }
    report(10, "four Penrose identities on 200 random symmetric matrices", dev <= 1e-9,
           dev_str(dev));
}

void criterion_11_gauss_markov() {
    std::mt19937_64 rng(2007);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng() % 10;
        const std::size_t p = 2 + rng() % 4;
        const Matrix x = fixtures::random_indicator(rng, n, std::min(p, n - 1));
        const Matrix m = fixtures::random_matrix(rng, x.cols(), n);
        const Vector gamma = fixtures::random_vector(rng, n);
        worst = std::min(worst, gauss_markov_excess(x, m, gamma));
    }
    report(11, "Gauss-Markov excess nonnegative on 200 random triples", worst >= -1e-10,
           "min excess " + std::to_string(worst));
}

void criterion_12_f_tail() {
    const double point_dev = std::abs(f_upper_tail(1.0, 1, 1) - 0.5);

    // 20-point grid across d1, d2 in 1..10 and f in 0.1..10.
    const std::size_t d1s[] = {1, 2, 3, 5, 10};
    const std::size_t d2s[] = {1, 4, 8, 10};
    const double fs[] = {0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    double grid_dev = 0.0;
    int idx = 0;
    for (std::size_t d1 : d1s)
        for (std::size_t d2 : d2s) {
            const double f = fs[idx++ % 6];
            grid_dev = std::max(grid_dev, std::abs(f_upper_tail(f, d1, d2) -
                                                   oracles::f_upper_tail_quadrature(f, d1, d2)));
        }
    const bool pass = point_dev <= 1e-10 && grid_dev <= 1e-6;
    report(12, "F tail: exact F(1,1) point and quadrature-oracle grid", pass,
           "point dev " + std::to_string(point_dev) + ", " + dev_str(grid_dev));
}

void criterion_13_monte_carlo() {
    const BlockDesign d = fixtures::ibd_4x2();
    const DesignTerms t = terms_of(d);
    const std::size_t n = d.n();

    const Matrix& pt_treat = t.pt_t.matrix();
    const Matrix residual_op =
        Matrix::identity(n) - t.p_b.matrix() - t.pt_t.matrix();

    // Fixed block effects, null treatment effects.
    Vector base(n, 10.0);
    for (std::size_t u = 0; u < n; ++u)
        base[u] += 0.75 * static_cast<double>(d.assignment()[u].first);

    const double sigma = 1.3;
    const double sigma2 = sigma * sigma;
    const int reps = 10000;

    std::mt19937_64 rng(2008);
    std::normal_distribution<double> gauss(0.0, sigma);

    double s2_sum = 0.0, s2_sq_sum = 0.0;
    int rejections = 0;
    for (int rep = 0; rep < reps; ++rep) {
        Vector y = base;
        for (double& x : y) x += gauss(rng);
        const Vector ystar = sweep_mean(y);

        const double ss_t = dot(ystar, pt_treat * ystar);
        const double rss = dot(ystar, residual_op * ystar);
        const double s2 = rss / 1.0;  // residual df is 1
        s2_sum += s2;
        s2_sq_sum += s2 * s2;

        const double f = (ss_t / 3.0) / s2;
        if (f_upper_tail(f, 3, 1) < 0.05) ++rejections;
    }

    const double mean_s2 = s2_sum / reps;
    const double var_s2 = s2_sq_sum / reps - mean_s2 * mean_s2;
    const double se = std::sqrt(var_s2 / reps);
    const bool s2_ok = std::abs(mean_s2 - sigma2) <= 3.0 * se;

    const double rate = static_cast<double>(rejections) / reps;
    const bool rate_ok = rate >= 0.04 && rate <= 0.06;

    char buf[128];
    std::snprintf(buf, sizeof(buf), "mean s2 %.4f vs %.4f (3se %.4f), rejection rate %.4f",
                  mean_s2, sigma2, 3.0 * se, rate);
    report(13, "Monte Carlo calibration of s2 and the 5% F test", s2_ok && rate_ok, buf);
}

void criterion_14_bib_check() {
    const BibCheck good = bib_check(7, 3, 3);
    const BibCheck bad = bib_check(4, 2, 2);
    const BibCheck open = bib_check(22, 7, 7);
    const bool pass = good.feasible && good.lambda_num == 1 && good.lambda_den == 1 &&
                      std::abs(*good.e - 7.0 / 9.0) < 1e-15 && !bad.feasible &&
                      bad.lambda_num == 2 && bad.lambda_den == 3 && open.feasible &&
                      open.existence_open &&
                      bib_check_to_text({22, 7, 7, open}).find("not to exist") != std::string::npos;
    report(14, "bib_check necessary conditions and existence caveat", pass,
           pass ? "all three parameter sets" : "verdict mismatch");
}

}  // namespace

int main() {
    criterion_1_information_matrix();
    criterion_2_cefs();
    criterion_3_contrast_efficiency();
    criterion_4_bib_closed_form();
    criterion_5_three_stage();
    criterion_6_two_stage();
    criterion_7_oracle_effects();
    criterion_8_additivity();
    criterion_9_projector_laws();
    criterion_10_moore_penrose();
    criterion_11_gauss_markov();
    criterion_12_f_tail();
    criterion_13_monte_carlo();
    criterion_14_bib_check();

    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all 14 criteria passed\n");
    return 0;
}
