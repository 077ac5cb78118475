#pragma once

#include "dparafac/random.hpp"
#include "dparafac/tensor.hpp"

#include <cmath>
#include <vector>

namespace testing_support {

using dparafac::Index;
using dparafac::Matrix;

inline double rel_diff(const Matrix& a, const Matrix& b)
{
    const double scale = std::max({1.0, a.norm(), b.norm()});
    return (a - b).norm() / scale;
}

inline dparafac::FactorTriple random_factors(dparafac::Rng& rng, Index I, Index J, Index K, Index R)
{
    return {rng.normal_matrix(I, R), rng.normal_matrix(J, R), rng.normal_matrix(K, R)};
}

/// Same B and C at every node, per-node A.
inline std::vector<dparafac::FactorTriple> random_node_factors(dparafac::Rng& rng, const std::vector<Index>& rows,
                                                               Index J, Index K, Index R)
{
    const Matrix B = rng.normal_matrix(J, R);
    const Matrix C = rng.normal_matrix(K, R);
    std::vector<dparafac::FactorTriple> out;
    for (Index I : rows)
        out.push_back({rng.normal_matrix(I, R), B, C});
    return out;
}

/// Triple loop, independent of the unfolding code.
inline dparafac::Tensor3 naive_reconstruct(const dparafac::FactorTriple& f)
{
    const Index I = f.A.rows(), J = f.B.rows(), K = f.C.rows(), R = f.A.cols();
    dparafac::Tensor3 T({I, J, K});
    for (Index i = 0; i < I; ++i)
        for (Index j = 0; j < J; ++j)
            for (Index k = 0; k < K; ++k) {
                double s = 0.0;
                for (Index r = 0; r < R; ++r)
                    s += f.A(i, r) * f.B(j, r) * f.C(k, r);
                T(i, j, k) = s;
            }
    return T;
}

/// Column-wise Kronecker: column r is kron(X(:,r), Y(:,r)).
inline Matrix naive_khatri_rao(const Matrix& X, const Matrix& Y)
{
    Matrix out(X.rows() * Y.rows(), X.cols());
    for (Index r = 0; r < X.cols(); ++r)
        for (Index i = 0; i < X.rows(); ++i)
            for (Index j = 0; j < Y.rows(); ++j)
                out(i * Y.rows() + j, r) = X(i, r) * Y(j, r);
    return out;
}

/// Exact rank of a small integer matrix by fraction-free elimination.
inline int exact_rank(const Matrix& M)
{
    std::vector<std::vector<long long>> a(static_cast<std::size_t>(M.rows()),
                                          std::vector<long long>(static_cast<std::size_t>(M.cols())));
    for (Index i = 0; i < M.rows(); ++i)
        for (Index j = 0; j < M.cols(); ++j)
            a[i][j] = std::llround(M(i, j));
    const std::size_t m = a.size(), n = m ? a[0].size() : 0;
    int rank = 0;
    long long prev = 1;
    for (std::size_t col = 0; col < n && static_cast<std::size_t>(rank) < m; ++col) {
        std::size_t piv = static_cast<std::size_t>(rank);
        while (piv < m && a[piv][col] == 0)
            ++piv;
        if (piv == m)
            continue;
        std::swap(a[piv], a[static_cast<std::size_t>(rank)]);
        const auto& p = a[static_cast<std::size_t>(rank)];
        for (std::size_t i = static_cast<std::size_t>(rank) + 1; i < m; ++i) {
            for (std::size_t j = col + 1; j < n; ++j)
                a[i][j] = (p[col] * a[i][j] - a[i][col] * p[j]) / prev;
            a[i][col] = 0;
        }
        prev = p[col];
        ++rank;
    }
    return rank;
}

/// Largest k such that every k-subset of columns has exact full rank.
inline int brute_force_k_rank(const Matrix& M)
{
    const int n = static_cast<int>(M.cols());
    int best = 0;
    for (int k = 1; k <= n; ++k) {
        bool all = true;
        for (unsigned mask = 0; mask < (1u << n) && all; ++mask) {
            if (__builtin_popcount(mask) != k)
                continue;
            Matrix sub(M.rows(), k);
            int c = 0;
            for (int j = 0; j < n; ++j)
                if (mask & (1u << j))
                    sub.col(c++) = M.col(j);
            all = exact_rank(sub) == k;
        }
        if (!all)
            break;
        best = k;
    }
    return best;
}

inline Matrix ternary_matrix(dparafac::Rng& rng, Index rows, Index cols)
{
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            M(i, j) = std::floor(rng.uniform() * 3.0) - 1.0;
    return M;
}

} // namespace testing_support
