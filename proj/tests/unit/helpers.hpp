#pragma once

#include "cimcs/instance.hpp"
#include "cimcs/qubo.hpp"
#include "cimcs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace testutil {

using cimcs::Index;
using cimcs::Matrix;
using cimcs::Support;
using cimcs::Vector;

// Test-side generator, deliberately not the library RNG.
inline Matrix random_matrix(Index rows, Index cols, unsigned seed, double scale = 1.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
    return m;
}

inline Vector random_vector(Index n, unsigned seed, double scale = 1.0) { return random_matrix(n, 1, seed, scale).col(0); }

inline Support random_support(Index n, unsigned seed, double p = 0.5) {
    std::mt19937_64 gen(seed);
    std::bernoulli_distribution bd(p);
    Support s(n);
    for (Index i = 0; i < n; ++i) s(i) = bd(gen) ? 1 : 0;
    return s;
}

// Energy term by term straight from A and y: pair sum over r<r' only.
inline double naive_energy(const Matrix& A, const Vector& y, double lambda, const Vector& R, const Support& s) {
    const Index n = A.cols();
    const Index m = A.rows();
    double e = 0.0;
    for (Index r = 0; r < n; ++r)
        for (Index q = r + 1; q < n; ++q) {
            double g = 0.0;
            for (Index k = 0; k < m; ++k) g += A(k, r) * A(k, q);
            e += g * R(r) * R(q) * s(r) * s(q);
        }
    for (Index r = 0; r < n; ++r) {
        double z = 0.0;
        for (Index k = 0; k < m; ++k) z += y(k) * A(k, r);
        e -= z * R(r) * s(r);
        e += lambda * s(r);
    }
    return e;
}

// Solve the support-restricted normal equations directly.
inline Vector direct_support_solve(const Matrix& A, const Vector& y, const Support& s) {
    std::vector<Index> idx;
    for (Index r = 0; r < s.size(); ++r)
        if (s(r)) idx.push_back(r);
    Matrix As(A.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) As.col(static_cast<Index>(k)) = A.col(idx[k]);
    const Vector sol = (As.transpose() * As).ldlt().solve(As.transpose() * y);
    Vector R = Vector::Zero(A.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) R(idx[k]) = sol(static_cast<Index>(k));
    return R;
}

} // namespace testutil
