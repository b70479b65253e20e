#pragma once

// Factors, indicator design matrices, mean sweeping, and the marginality /
// orthogonality predicates that decide how model terms relate.

#include <cstddef>
#include <string>
#include <vector>

#include "sweepaov/errors.hpp"
#include "sweepaov/matrix.hpp"
#include "sweepaov/spectral.hpp"

namespace sweepaov {

// A classification of experimental units: every unit carries exactly one
// level, encoded 1..num_levels. `labels` holds the original level names in
// first-appearance order (labels[j] names level j+1).
struct Factor {
    std::string name;
    std::vector<int> levels;
    int num_levels = 0;
    std::vector<std::string> labels;

    Factor() = default;

    Factor(std::string name_, std::vector<int> levels_, int num_levels_,
           std::vector<std::string> labels_ = {})
        : name(std::move(name_)),
          levels(std::move(levels_)),
          num_levels(num_levels_),
          labels(std::move(labels_)) {
        if (num_levels < 1) throw ValidationError("Factor " + name + ": no levels");
        for (int lv : levels)
            if (lv < 1 || lv > num_levels)
                throw ValidationError("Factor " + name + ": level index " + std::to_string(lv) +
                                      " outside 1.." + std::to_string(num_levels));
        if (labels.empty()) {
            for (int j = 1; j <= num_levels; ++j) labels.push_back(std::to_string(j));
        } else if (static_cast<int>(labels.size()) != num_levels) {
            throw ValidationError("Factor " + name + ": label count mismatch");
        }
    }

    std::size_t n() const { return levels.size(); }
};

struct UnitTable {
    std::size_t n = 0;
    std::vector<Factor> factors;
    Vector response;  // empty when no response column was supplied

    bool has_response() const { return !response.empty(); }
};

// A factor together with its n x p 0/1 design matrix; each row has exactly
// one unit entry.
struct ModelTerm {
    std::string factor_name;
    Matrix design;
};

inline ModelTerm indicator_matrix(const Factor& f, std::size_t n) {
    if (f.n() != n)
        throw ValidationError("indicator_matrix: factor " + f.name + " has " +
                              std::to_string(f.n()) + " units, expected " + std::to_string(n));
    Matrix x(n, static_cast<std::size_t>(f.num_levels));
    for (std::size_t h = 0; h < n; ++h) {
        const int lv = f.levels[h];
        if (lv < 1 || lv > f.num_levels)
            throw ValidationError("indicator_matrix: level out of range at unit " +
                                  std::to_string(h + 1));
        x(h, static_cast<std::size_t>(lv - 1)) = 1.0;
    }
    return ModelTerm{f.name, std::move(x)};
}

// P_G = (1/n) J_n, the rank-one projector onto the constant vector.
inline Projector grand_mean_projector(std::size_t n) {
    if (n == 0) throw ValidationError("grand_mean_projector: zero units");
    Matrix j(n, n, 1.0 / static_cast<double>(n));
    return Projector::adopt(j);
}

// y* = (I - P_G) y, the mean-corrected observations.
inline Vector sweep_mean(const Vector& y) {
    if (y.empty()) throw ValidationError("sweep_mean: empty vector");
    const double mean = sum(y) / static_cast<double>(y.size());
    Vector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - mean;
    return out;
}

// F1 is marginal to F2 when R(X1) is contained in R(X2); decided numerically
// by checking that the projector of X2 fixes every column of X1.
inline bool is_marginal(const ModelTerm& x1, const ModelTerm& x2, const Tolerance& tol = {}) {
    if (x1.design.rows() != x2.design.rows())
        throw ValidationError("is_marginal: terms defined on different unit counts");
    const Projector p2 = projector_from_design(x2.design, tol);
    return max_abs(p2.matrix() * x1.design - x1.design) <= tol.abs_eps;
}

// Factors are orthogonal when their projectors commute down to the grand-mean
// projector: P1 P2 = P2 P1 = P_G.
inline bool is_orthogonal(const Projector& p1, const Projector& p2, const Projector& pg,
                          const Tolerance& tol = {}) {
    if (p1.order() != p2.order() || p1.order() != pg.order())
        throw ValidationError("is_orthogonal: projector orders differ");
    return max_abs(p1.matrix() * p2.matrix() - pg.matrix()) <= tol.abs_eps &&
           max_abs(p2.matrix() * p1.matrix() - pg.matrix()) <= tol.abs_eps;
}

}  // namespace sweepaov
