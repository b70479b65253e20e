#pragma once

// Shared test fixtures: the two reference designs, random-design generation,
// and small random-matrix helpers.

#include <random>
#include <utility>
#include <vector>

#include "sweepaov/block_design.hpp"
#include "sweepaov/matrix.hpp"
#include "sweepaov/model.hpp"

namespace fixtures {

using sweepaov::BlockDesign;
using sweepaov::Matrix;
using sweepaov::Vector;

// Incomplete block design for 4 treatments in blocks of size 2:
// blocks {1,3}, {2,4}, {2,3}, {1,4}, units in block-major order.
inline BlockDesign ibd_4x2() {
    std::vector<std::pair<std::size_t, std::size_t>> units = {
        {0, 0}, {0, 2}, {1, 1}, {1, 3}, {2, 1}, {2, 2}, {3, 0}, {3, 3}};
    return BlockDesign::create(4, 4, std::move(units));
}

// BIB design for 7 treatments in 7 blocks of size 3: block j holds
// treatments {j, j+1, j+3} mod 7. Every pair concurs exactly once.
inline BlockDesign bib_7x3() {
    std::vector<std::pair<std::size_t, std::size_t>> units;
    for (std::size_t j = 0; j < 7; ++j)
        for (std::size_t offset : {0, 1, 3})
            units.emplace_back(j, (j + offset) % 7);
    return BlockDesign::create(7, 7, std::move(units));
}

// Randomized complete block design: every treatment once in every block.
inline BlockDesign rcbd(std::size_t v, std::size_t b) {
    std::vector<std::pair<std::size_t, std::size_t>> units;
    for (std::size_t j = 0; j < b; ++j)
        for (std::size_t i = 0; i < v; ++i) units.emplace_back(j, i);
    return BlockDesign::create(v, b, std::move(units));
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Vector y(n);
    for (double& x : y) x = gauss(rng);
    return y;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = gauss(rng);
    return m;
}

// Random symmetric matrix, rank-deficient with probability ~1/2: either
// B + B' (generically full rank) or B B' with B thin (rank <= cols).
inline Matrix random_symmetric(std::mt19937_64& rng, std::size_t n) {
    if (rng() % 2 == 0) {
        Matrix b = random_matrix(rng, n, n);
        Matrix s(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (b(i, j) + b(j, i));
        return s;
    }
    const std::size_t m = 1 + rng() % n;  // rank at most m
    Matrix b = random_matrix(rng, n, m);
    return b * b.transposed();
}

// Random symmetric matrix with a controlled spectrum: eigenvalues are exact
// zeros (probability ~0.4 each, at least one) or signed values in
// [0.25, 4], on an orthonormal basis built by modified Gram-Schmidt. Rank
// deficiency is genuine while the nonzero spectrum stays well conditioned,
// so pseudo-inverse identities are meaningful at tight tolerances.
inline Matrix random_symmetric_ranked(std::mt19937_64& rng, std::size_t n) {
    Matrix q = random_matrix(rng, n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double proj = 0.0;
            for (std::size_t i = 0; i < n; ++i) proj += q(i, k) * q(i, j);
            for (std::size_t i = 0; i < n; ++i) q(i, j) -= proj * q(i, k);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-8) return random_symmetric_ranked(rng, n);  // degenerate draw, retry
        for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
    }

    std::uniform_real_distribution<double> mag(0.25, 4.0);
    Vector lambda(n, 0.0);
    bool any_zero = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng() % 5 < 2) {
            any_zero = true;
            continue;
        }
        lambda[i] = (rng() % 2 ? 1.0 : -1.0) * mag(rng);
    }
    if (!any_zero) lambda[rng() % n] = 0.0;

    Matrix h(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        if (lambda[k] == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) h(i, j) += lambda[k] * q(i, k) * q(j, k);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = 0.5 * (h(i, j) + h(j, i));
            h(i, j) = s;
            h(j, i) = s;
        }
    return h;
}

// Random indicator design matrix for a factor with p levels on n units,
// every level hit at least once.
inline Matrix random_indicator(std::mt19937_64& rng, std::size_t n, std::size_t p) {
    std::vector<int> levels(n);
    for (std::size_t i = 0; i < p; ++i) levels[i] = static_cast<int>(i) + 1;
    std::uniform_int_distribution<int> pick(1, static_cast<int>(p));
    for (std::size_t i = p; i < n; ++i) levels[i] = pick(rng);
    std::shuffle(levels.begin(), levels.end(), rng);
    Matrix x(n, p);
    for (std::size_t i = 0; i < n; ++i) x(i, static_cast<std::size_t>(levels[i] - 1)) = 1.0;
    return x;
}

// Random connected equal-replicate, equal-block-size design with v <= 8 and
// b <= 10. Treatment copies are shuffled into blocks; retries until the
// bipartite treatment-block graph is connected.
inline BlockDesign random_connected_design(std::mt19937_64& rng) {
    for (;;) {
        const std::size_t v = 2 + rng() % 7;       // 2..8
        const std::size_t r = 2 + rng() % 3;       // 2..4
        const std::size_t n = v * r;
        std::vector<std::size_t> divisors;
        for (std::size_t k = 2; k <= n; ++k)
            if (n % k == 0 && n / k <= 10 && n / k >= 2) divisors.push_back(k);
        if (divisors.empty()) continue;
        const std::size_t k = divisors[rng() % divisors.size()];
        const std::size_t b = n / k;

        std::vector<std::size_t> pool;
        for (std::size_t t = 0; t < v; ++t)
            for (std::size_t c = 0; c < r; ++c) pool.push_back(t);
        std::shuffle(pool.begin(), pool.end(), rng);

        std::vector<std::pair<std::size_t, std::size_t>> units;
        for (std::size_t u = 0; u < n; ++u) units.emplace_back(u / k, pool[u]);
        BlockDesign d = BlockDesign::create(v, b, std::move(units));
        if (sweepaov::is_connected(sweepaov::incidence(d))) return d;
    }
}

}  // namespace fixtures
