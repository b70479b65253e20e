#pragma once

// Incidence and concurrence matrices, connectivity, the information matrix,
// canonical efficiency factors, and balanced-incomplete-block recognition
// with its closed-form efficiency factor.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sweepaov/errors.hpp"
#include "sweepaov/matrix.hpp"
#include "sweepaov/model.hpp"
#include "sweepaov/spectral.hpp"

namespace sweepaov {

// Equal-replicate, equal-block-size design: v treatments in b blocks of k
// units, each treatment replicated r times, n = vr = bk units in all.
// Assignment is per-unit (block, treatment), zero-based.
class BlockDesign {
public:
    static BlockDesign create(std::size_t v, std::size_t b,
                              std::vector<std::pair<std::size_t, std::size_t>> assignment,
                              std::vector<std::string> block_labels = {},
                              std::vector<std::string> treatment_labels = {}) {
        BlockDesign d;
        d.v_ = v;
        d.b_ = b;
        d.n_ = assignment.size();
        d.assignment_ = std::move(assignment);

        if (v < 1 || b < 1 || d.n_ == 0) throw ValidationError("BlockDesign: empty design");

        std::vector<std::size_t> block_size(b, 0), replication(v, 0);
        for (const auto& [blk, trt] : d.assignment_) {
            if (blk >= b) throw ValidationError("BlockDesign: block index out of range");
            if (trt >= v) throw ValidationError("BlockDesign: treatment index out of range");
            ++block_size[blk];
            ++replication[trt];
        }
        for (std::size_t j = 0; j < b; ++j)
            if (block_size[j] != block_size[0])
                throw ValidationError("BlockDesign: unequal block sizes (block " +
                                      std::to_string(j + 1) + " has " +
                                      std::to_string(block_size[j]) + " units, expected " +
                                      std::to_string(block_size[0]) + ")");
        for (std::size_t i = 0; i < v; ++i)
            if (replication[i] != replication[0])
                throw ValidationError("BlockDesign: unequal replication (treatment " +
                                      std::to_string(i + 1) + " appears " +
                                      std::to_string(replication[i]) + " times, expected " +
                                      std::to_string(replication[0]) + ")");
        d.k_ = block_size[0];
        d.r_ = replication[0];

        d.block_labels_ = std::move(block_labels);
        d.treatment_labels_ = std::move(treatment_labels);
        if (d.block_labels_.empty())
            for (std::size_t j = 1; j <= b; ++j) d.block_labels_.push_back(std::to_string(j));
        if (d.treatment_labels_.empty())
            for (std::size_t i = 1; i <= v; ++i) d.treatment_labels_.push_back(std::to_string(i));
        if (d.block_labels_.size() != b || d.treatment_labels_.size() != v)
            throw ValidationError("BlockDesign: label count mismatch");
        return d;
    }

    std::size_t v() const { return v_; }
    std::size_t b() const { return b_; }
    std::size_t k() const { return k_; }
    std::size_t r() const { return r_; }
    std::size_t n() const { return n_; }
    const std::vector<std::pair<std::size_t, std::size_t>>& assignment() const {
        return assignment_;
    }
    const std::vector<std::string>& block_labels() const { return block_labels_; }
    const std::vector<std::string>& treatment_labels() const { return treatment_labels_; }

    Factor block_factor() const {
        std::vector<int> levels(n_);
        for (std::size_t u = 0; u < n_; ++u) levels[u] = static_cast<int>(assignment_[u].first) + 1;
        return Factor("block", std::move(levels), static_cast<int>(b_), block_labels_);
    }

    Factor treatment_factor() const {
        std::vector<int> levels(n_);
        for (std::size_t u = 0; u < n_; ++u)
            levels[u] = static_cast<int>(assignment_[u].second) + 1;
        return Factor("treatment", std::move(levels), static_cast<int>(v_), treatment_labels_);
    }

private:
    std::size_t v_ = 0, b_ = 0, k_ = 0, r_ = 0, n_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> assignment_;
    std::vector<std::string> block_labels_;
    std::vector<std::string> treatment_labels_;
};

// N = X'Z, the v x b incidence matrix: N(i, j) counts units of treatment i in
// block j. Row sums are r, column sums k.
inline Matrix incidence(const BlockDesign& d) {
    Matrix n(d.v(), d.b());
    for (const auto& [blk, trt] : d.assignment()) n(trt, blk) += 1.0;
    return n;
}

// NN', the concurrence matrix: entry (i, i') counts how often treatments i
// and i' meet in a block.
inline Matrix concurrence(const Matrix& n) {
    for (double x : n.data())
        if (x < 0.0 || std::abs(x - std::round(x)) > 1e-9)
            throw ValidationError("concurrence: incidence entries must be nonnegative integers");
    return n * n.transposed();
}

// Connectivity of the bipartite treatment-block graph, by traversal.
inline bool is_connected(const Matrix& n) {
    const std::size_t v = n.rows(), b = n.cols();
    if (v == 0) return false;
    std::vector<char> seen_t(v, 0), seen_b(b, 0);
    std::vector<std::size_t> stack{0};
    seen_t[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const std::size_t t = stack.back();
        stack.pop_back();
        for (std::size_t j = 0; j < b; ++j) {
            if (n(t, j) <= 0.0 || seen_b[j]) continue;
            seen_b[j] = 1;
            for (std::size_t i = 0; i < v; ++i) {
                if (n(i, j) <= 0.0 || seen_t[i]) continue;
                seen_t[i] = 1;
                ++reached;
                stack.push_back(i);
            }
        }
    }
    return reached == v;
}

// A = I_v - NN'/(rk), the (scaled) matrix of the reduced normal equations.
// Its rows sum to zero; its nonzero latent roots are the canonical
// efficiency factors.
inline Matrix information_matrix(const BlockDesign& d) {
    const Matrix n = incidence(d);
    const Matrix conc = concurrence(n);
    const double rk = static_cast<double>(d.r()) * static_cast<double>(d.k());
    Matrix a = Matrix::identity(d.v());
    for (std::size_t i = 0; i < d.v(); ++i)
        for (std::size_t j = 0; j < d.v(); ++j) a(i, j) -= conc(i, j) / rk;
    return a;
}

struct EfficiencyReport {
    Vector cefs;            // v-1 values in (0, 1], descending
    Matrix contrast_basis;  // v x (v-1); column i is the contrast with efficiency cefs[i]
    double harmonic_mean = 0.0;  // E, the average efficiency factor
    double geometric_mean = 0.0;
    double min_cef = 0.0;
    bool is_bib = false;
    std::optional<long long> lambda;
    std::optional<double> e_bib;
};

// Spectral summary of the information matrix. The single zero root on the
// constant vector is discarded; more than one numerically-zero root means
// the design is disconnected and no efficiency summary exists.
inline EfficiencyReport canonical_efficiency_factors(const Matrix& a, const Tolerance& tol = {}) {
    if (!a.square()) throw ValidationError("canonical_efficiency_factors: matrix not square");
    const std::size_t v = a.rows();
    if (v < 2) throw ValidationError("canonical_efficiency_factors: need at least 2 treatments");
    {
        Vector ones(v, 1.0);
        if (max_abs(a * ones) > tol.abs_eps)
            throw ValidationError("canonical_efficiency_factors: rows do not sum to zero");
    }

    const SymmetricEigen eig = eigh(a, tol);
    const std::size_t rank = numeric_rank(eig, tol);
    if (rank < v - 1)
        throw ValidationError(
            "canonical_efficiency_factors: disconnected design (information matrix rank " +
            std::to_string(rank) + " < " + std::to_string(v - 1) + ")");

    EfficiencyReport rep;
    rep.cefs.assign(eig.values.begin(), eig.values.begin() + (v - 1));
    rep.contrast_basis = Matrix(v, v - 1);
    for (std::size_t j = 0; j + 1 < v; ++j)
        for (std::size_t i = 0; i < v; ++i) rep.contrast_basis(i, j) = eig.vectors(i, j);

    double inv_sum = 0.0, log_sum = 0.0;
    for (double e : rep.cefs) {
        if (e > 1.0 + tol.abs_eps)
            throw NumericError("canonical_efficiency_factors: efficiency factor " +
                               std::to_string(e) + " exceeds one");
        inv_sum += 1.0 / e;
        log_sum += std::log(e);
    }
    rep.harmonic_mean = static_cast<double>(v - 1) / inv_sum;
    rep.geometric_mean = std::exp(log_sum / static_cast<double>(v - 1));
    rep.min_cef = rep.cefs.back();
    return rep;
}

// c'Ac / c'c, the efficiency factor of the treatment contrast c.
inline double contrast_efficiency(const Vector& c, const Matrix& a, const Tolerance& tol = {}) {
    if (!a.square() || c.size() != a.rows())
        throw ValidationError("contrast_efficiency: dimension mismatch");
    const double norm2 = dot(c, c);
    if (norm2 == 0.0) throw ValidationError("contrast_efficiency: zero vector");
    if (std::abs(sum(c)) > tol.abs_eps * std::max(1.0, max_abs(c)) * static_cast<double>(c.size()))
        throw ValidationError("contrast_efficiency: not a contrast (entries do not sum to zero)");
    return dot(c, a * c) / norm2;
}

struct BibCheck {
    long long lambda_num = 0;  // lambda = r(k-1)/(v-1), reduced
    long long lambda_den = 1;
    long long blocks = 0;  // b = vr/k when integral, else 0
    bool feasible = false;
    std::optional<double> e;  // lambda*v/(rk) when feasible
    bool existence_open = false;  // feasibility is necessary, not sufficient
};

// Necessary conditions for the existence of a BIB design with parameters
// (v, k, r): lambda integral, b integral, b >= v. Existence itself is not
// decided; parameter sets passing all three may still admit no design.
inline BibCheck bib_check(long long v, long long k, long long r) {
    if (v < 2 || k < 2 || k > v || r < 1)
        throw ValidationError("bib_check: need v >= 2, 2 <= k <= v, r >= 1");
    BibCheck out;
    long long num = r * (k - 1);
    long long den = v - 1;
    const long long g = std::gcd(num, den);
    out.lambda_num = num / g;
    out.lambda_den = den / g;

    const bool lambda_integral = out.lambda_den == 1;
    const bool b_integral = (v * r) % k == 0;
    if (b_integral) out.blocks = (v * r) / k;
    out.feasible = lambda_integral && b_integral && out.blocks >= v;
    if (out.feasible) {
        out.e = static_cast<double>(out.lambda_num) * static_cast<double>(v) /
                (static_cast<double>(r) * static_cast<double>(k));
        out.existence_open = true;
    }
    return out;
}

struct BibResult {
    bool is_bib = false;
    long long lambda = 0;
    std::string note;
};

// A design is BIB when every treatment pair concurs exactly lambda times,
// i.e. NN' = (r - lambda) I + lambda J. Requires an incomplete design
// (k < v); non-binary designs are reported as not balanced.
inline BibResult is_bib(const BlockDesign& d) {
    if (d.k() >= d.v())
        throw ValidationError("is_bib: design is not incomplete (block size >= treatments)");
    const Matrix n = incidence(d);
    for (double x : n.data())
        if (x > 1.5)
            return BibResult{false, 0,
                             "design is not binary (a treatment repeats within a block)"};
    const Matrix conc = concurrence(n);
    const double lambda = conc(0, 1);
    for (std::size_t i = 0; i < d.v(); ++i)
        for (std::size_t j = 0; j < d.v(); ++j) {
            if (i == j) continue;
            if (std::abs(conc(i, j) - lambda) > 0.5) return BibResult{false, 0, ""};
        }
    return BibResult{true, static_cast<long long>(std::llround(lambda)), ""};
}

struct EffectVariances {
    Matrix var_matrix;                   // Var(tau_hat), the Moore-Penrose form
    std::optional<double> pairwise_bib;  // 2 sigma^2 / (r e) for a BIB design
};

// Var(tau_hat) = (sigma^2 / r) * sum_i (1/e_i) eta_i eta_i'.
inline EffectVariances effect_variances(const EfficiencyReport& rep, std::size_t r,
                                        double sigma2) {
    if (r == 0) throw ValidationError("effect_variances: zero replication");
    if (rep.cefs.empty()) throw ValidationError("effect_variances: empty efficiency report");
    const std::size_t v = rep.contrast_basis.rows();
    Matrix var(v, v);
    for (std::size_t idx = 0; idx < rep.cefs.size(); ++idx) {
        const double w = sigma2 / (static_cast<double>(r) * rep.cefs[idx]);
        for (std::size_t i = 0; i < v; ++i) {
            const double ei = rep.contrast_basis(i, idx);
            if (ei == 0.0) continue;
            for (std::size_t j = 0; j < v; ++j) var(i, j) += w * ei * rep.contrast_basis(j, idx);
        }
    }
    EffectVariances out;
    out.var_matrix = std::move(var);
    if (rep.is_bib && rep.e_bib)
        out.pairwise_bib = 2.0 * sigma2 / (static_cast<double>(r) * *rep.e_bib);
    return out;
}

// Full efficiency summary for a design: canonical factors plus the BIB
// recognition fields when they apply.
inline EfficiencyReport efficiency_report(const BlockDesign& d, const Tolerance& tol = {}) {
    EfficiencyReport rep = canonical_efficiency_factors(information_matrix(d), tol);
    if (d.k() < d.v()) {
        const BibResult bib = is_bib(d);
        if (bib.is_bib) {
            rep.is_bib = true;
            rep.lambda = bib.lambda;
            rep.e_bib = static_cast<double>(bib.lambda) * static_cast<double>(d.v()) /
                        (static_cast<double>(d.r()) * static_cast<double>(d.k()));
        }
    }
    return rep;
}

}  // namespace sweepaov
