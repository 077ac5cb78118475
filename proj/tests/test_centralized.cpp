#include "dparafac/centralized.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <array>

using namespace dparafac;
using testing_support::rel_diff;

namespace {

Tensor3 exact_tensor(Rng& rng, Index I, Index J, Index K, Index R, FactorTriple* truth = nullptr)
{
    const FactorTriple f = testing_support::random_factors(rng, I, J, K, R);
    if (truth)
        *truth = f;
    return reconstruct(f);
}

// Central differences of the node-ordered residual w.r.t. the packed parameters.
Matrix fd_jacobian(std::span<const Tensor3> data, const std::vector<FactorTriple>& nodes, double h)
{
    std::vector<Index> rows;
    for (const auto& f : nodes)
        rows.push_back(f.A.rows());
    const Index J = nodes[0].B.rows(), K = nodes[0].C.rows(), R = nodes[0].rank();
    const Vector p = pack_parameters(nodes);
    const Index m = build_residual(data, nodes).size();
    Matrix Jfd(m, p.size());
    for (Index c = 0; c < p.size(); ++c) {
        Vector pp = p, pm = p;
        pp(c) += h;
        pm(c) -= h;
        Jfd.col(c) = (build_residual(data, unpack_parameters(pp, rows, J, K, R)) -
                      build_residual(data, unpack_parameters(pm, rows, J, K, R))) /
                     (2.0 * h);
    }
    return Jfd;
}

} // namespace

TEST(SolveGram, SpdAndSingular)
{
    Rng rng(1);
    const Matrix X = rng.normal_matrix(6, 3);
    const Matrix G = X.transpose() * X;
    const Matrix rhs = rng.normal_matrix(3, 2);
    EXPECT_LT(rel_diff(G * solve_gram(G, rhs), rhs), 1e-12);
    EXPECT_LT(rel_diff(inverse_gram(G) * G, Matrix::Identity(3, 3)), 1e-12);

    // Rank-deficient Gram: jitter keeps the solve finite.
    Matrix S = Matrix::Ones(2, 2);
    const Matrix sol = solve_gram(S, Matrix::Ones(2, 1));
    EXPECT_TRUE(sol.allFinite());
    EXPECT_LT((S * sol - Matrix::Ones(2, 1)).norm(), 1e-6);

    EXPECT_THROW(solve_gram(G, Matrix::Ones(2, 1)), DimensionError);
}

TEST(Als, TruthIsFixedPoint)
{
    Rng rng(2);
    FactorTriple truth;
    const Tensor3 T = exact_tensor(rng, 5, 4, 6, 3, &truth);
    const FactorTriple next = als_sweep(T, truth);
    EXPECT_LT((reconstruct(next).as_vector() - T.as_vector()).norm(), 1e-10 * T.as_vector().norm());
}

TEST(Als, HalfStepCostNonIncreasing)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Tensor3 T = exact_tensor(rng, 9, 4, 10, 4);
        const FactorTriple init = testing_support::random_factors(rng, 9, 4, 10, 4);
        const AlsTrace tr = als_fit(T, init, {30});
        ASSERT_EQ(tr.half_step_cost.size(), 90u);
        double prev = cost(T, init);
        for (double c : tr.half_step_cost) {
            EXPECT_LE(c, prev * (1.0 + 1e-12) + 1e-300);
            prev = c;
        }
    }
}

TEST(Als, HalfStepIsLocallyOptimal)
{
    Rng rng(3);
    const Tensor3 T = exact_tensor(rng, 6, 4, 5, 3);
    FactorTriple f = testing_support::random_factors(rng, 6, 4, 5, 3);
    // Just the B update of a sweep.
    f.B = solve_gram(kr_gram(f.C, f.A), khatri_rao(f.C, f.A).transpose() * unfold(T, 2)).transpose();
    const double base = cost(T, f);
    for (int t = 0; t < 20; ++t) {
        Matrix d = rng.normal_matrix(4, 3);
        d *= 1e-4 / d.norm();
        FactorTriple g = f;
        g.B += d;
        EXPECT_GE(cost(T, g), base * (1.0 - 1e-12));
    }
}

TEST(Als, Errors)
{
    const Tensor3 T({2, 3, 4});
    Rng rng(4);
    EXPECT_THROW(als_fit(T, testing_support::random_factors(rng, 2, 3, 4, 2), {0}), InputError);
    EXPECT_THROW(als_sweep(T, testing_support::random_factors(rng, 3, 3, 4, 2)), DimensionError);
}

TEST(Residual, ExactZeroAndNorm)
{
    Rng rng(5);
    FactorTriple f;
    Tensor3 T = exact_tensor(rng, 3, 4, 5, 2, &f);
    EXPECT_LT(build_residual(T, f).norm(), 1e-12);

    const FactorTriple zero{Matrix::Zero(3, 2), Matrix::Zero(4, 2), Matrix::Zero(5, 2)};
    EXPECT_EQ(build_residual(T, zero), T.as_vector());

    T(2, 1, 3) -= 0.75;
    const FactorTriple g = testing_support::random_factors(rng, 3, 4, 5, 2);
    double loop = 0.0;
    const Tensor3 M = testing_support::naive_reconstruct(g);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 4; ++j)
            for (Index k = 0; k < 5; ++k)
                loop += 0.5 * (T(i, j, k) - M(i, j, k)) * (T(i, j, k) - M(i, j, k));
    EXPECT_NEAR(build_residual(T, g).squaredNorm(), 2.0 * loop, 1e-12 * loop);
    // Canonical index m = (i*J + j)*K + k.
    EXPECT_DOUBLE_EQ(build_residual(T, g)((2 * 4 + 1) * 5 + 3), T(2, 1, 3) - M(2, 1, 3));
}

TEST(Packing, RoundTrip)
{
    Rng rng(6);
    const auto nodes = testing_support::random_node_factors(rng, {1, 2, 3}, 4, 5, 2);
    const Vector p = pack_parameters(nodes);
    EXPECT_EQ(p.size(), 2 * (6 + 4 + 5));
    const std::vector<Index> rows{1, 2, 3};
    const auto back = unpack_parameters(p, rows, 4, 5, 2);
    for (std::size_t l = 0; l < nodes.size(); ++l) {
        EXPECT_EQ(back[l].A, nodes[l].A);
        EXPECT_EQ(back[l].B, nodes[l].B);
        EXPECT_EQ(back[l].C, nodes[l].C);
    }
    // vec(A^T) lists rows: a_{1,0} sits right after a_{0,R-1}.
    EXPECT_EQ(pack_local(nodes[1].A)(2), nodes[1].A(1, 0));
    Matrix B(4, 2), C(5, 2);
    unpack_shared(pack_shared(nodes[0].B, nodes[0].C), B, C);
    EXPECT_EQ(B, nodes[0].B);
    EXPECT_EQ(C, nodes[0].C);
    EXPECT_THROW(unpack_parameters(p.head(5), rows, 4, 5, 2), DimensionError);
    EXPECT_THROW(unpack_local(Vector::Zero(5), 2, 2), DimensionError);
}

TEST(Jacobian, AllOnesRankOne)
{
    const FactorTriple f{Matrix::Ones(2, 1), Matrix::Ones(3, 1), Matrix::Ones(2, 1)};
    const NodeJacobian Jn = build_dense_jacobian(f);
    // One -1 per row in the A block, one in each of the B and C blocks.
    EXPECT_TRUE((Jn.Ja.array() == 0.0 || Jn.Ja.array() == -1.0).all());
    EXPECT_TRUE((Jn.Jpbar.array() == 0.0 || Jn.Jpbar.array() == -1.0).all());
    EXPECT_TRUE((Jn.Ja.rowwise().sum().array() == -1.0).all());
    EXPECT_TRUE((Jn.Jpbar.rowwise().sum().array() == -2.0).all());
}

TEST(Jacobian, MatchesFiniteDifferences)
{
    Rng rng(7);
    const auto nodes = testing_support::random_node_factors(rng, {1, 2, 1}, 4, 5, 3);
    std::vector<Tensor3> data;
    for (const auto& f : nodes) {
        Tensor3 T = reconstruct(f);
        for (double& x : T.data())
            x += rng.normal();
        data.push_back(T);
    }
    const Matrix Jg = build_global_jacobian(nodes);
    const Matrix Jfd = fd_jacobian(data, nodes, 1e-6);
    EXPECT_LT((Jg - Jfd).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Jacobian, LocalBlockIsKronecker)
{
    Rng rng(8);
    const FactorTriple f = testing_support::random_factors(rng, 3, 4, 5, 2);
    const NodeJacobian Jn = build_dense_jacobian(f);
    const Matrix G = kr_gram(f.B, f.C);
    Matrix expected = Matrix::Zero(6, 6);
    for (Index i = 0; i < 3; ++i)
        expected.block(2 * i, 2 * i, 2, 2) = G;
    EXPECT_LT(rel_diff(Jn.Ja.transpose() * Jn.Ja, expected), 1e-12);
    // J_a = -(I kron (B kr C)).
    const Matrix BC = khatri_rao(f.B, f.C);
    for (Index i = 0; i < 3; ++i)
        EXPECT_LT(rel_diff(Jn.Ja.block(i * 20, i * 2, 20, 2), -BC), 1e-15);
}

TEST(Jacobian, GlobalIsBlockDiagonalInA)
{
    Rng rng(9);
    const auto nodes = testing_support::random_node_factors(rng, {1, 2, 2}, 3, 4, 2);
    const Matrix Jg = build_global_jacobian(nodes);
    Index row = 0, col = 0;
    for (const auto& f : nodes) {
        const Index m = f.A.rows() * 12, c = f.A.rows() * 2;
        const Matrix cols = Jg.middleCols(col, c);
        EXPECT_EQ(cols.topRows(row).cwiseAbs().sum(), 0.0);
        EXPECT_EQ(cols.bottomRows(Jg.rows() - row - m).cwiseAbs().sum(), 0.0);
        row += m;
        col += c;
    }
}

TEST(LmStep, Basics)
{
    Rng rng(10);
    const Matrix J = rng.normal_matrix(12, 4);
    const Vector r = rng.normal_matrix(12, 1);
    EXPECT_EQ(lm_step(J, Vector::Zero(12), 1e-3).norm(), 0.0);

    const Vector big = lm_step(J, r, 1e12);
    EXPECT_LE(big.norm(), (J.transpose() * r).norm() / 1e12 * (1 + 1e-9));

    const Vector ls = J.colPivHouseholderQr().solve(-r);
    EXPECT_LT((lm_step(J, r, 0.0) - ls).norm(), 1e-10 * ls.norm());

    EXPECT_THROW(lm_step(J, r, -1.0), InputError);
    EXPECT_THROW(lm_step(J, Vector::Zero(3), 1.0), DimensionError);
}

TEST(Lm, TruthGivesNegligibleStep)
{
    Rng rng(11);
    FactorTriple f;
    const Tensor3 T = exact_tensor(rng, 4, 3, 5, 2, &f);
    const std::array<FactorTriple, 1> nodes{f};
    const Vector dp = lm_step(build_global_jacobian(nodes), build_residual(T, f), 1e-3);
    EXPECT_LE(dp.norm(), 1e-8);
}

TEST(Lm, ModelAgreementForSmallSteps)
{
    Rng rng(12);
    const Tensor3 T = exact_tensor(rng, 4, 3, 5, 2);
    const FactorTriple f = testing_support::random_factors(rng, 4, 3, 5, 2);
    const std::array<FactorTriple, 1> nodes{f};
    const Matrix J = build_global_jacobian(nodes);
    const Vector r = build_residual(T, f);
    const Vector p = pack_parameters(nodes);
    const std::array<Index, 1> rows{4};
    Vector dp = lm_step(J, r, 1e-3);
    dp *= 1e-3 * p.norm() / dp.norm();
    const double actual = cost(T, unpack_parameters(p + dp, rows, 3, 5, 2)[0]) - cost(T, f);
    const double predicted = 0.5 * (r + J * dp).squaredNorm() - 0.5 * r.squaredNorm();
    EXPECT_NEAR(actual, predicted, 0.1 * std::abs(predicted));
}

TEST(Lm, FitsExactTensor)
{
    Rng rng(13);
    const Tensor3 T = exact_tensor(rng, 9, 4, 10, 4);
    const FactorTriple init = testing_support::random_factors(rng, 9, 4, 10, 4);
    const LmTrace tr = lm_fit(T, init, {.iterations = 100});
    ASSERT_EQ(tr.cost.size(), 100u);
    EXPECT_LT(tr.cost.back(), 1e-12 * T.squared_norm());
    EXPECT_THROW(lm_fit(T, init, {.iterations = 1, .damping = 0.0}), InputError);
}

TEST(Lm, AdaptiveDampingNeverIncreasesCost)
{
    Rng rng(14);
    const Tensor3 T = exact_tensor(rng, 5, 4, 6, 3);
    const FactorTriple init = testing_support::random_factors(rng, 5, 4, 6, 3);
    const LmTrace tr = lm_fit(T, init, {.iterations = 40, .adaptive_damping = true});
    double prev = cost(T, init);
    for (double c : tr.cost) {
        EXPECT_LE(c, prev);
        prev = c;
    }
}

TEST(PartitionedLm, MatchesPlainLmWithUniformDamping)
{
    Rng rng(15);
    const auto nodes = testing_support::random_node_factors(rng, {1, 2, 1}, 4, 5, 2);
    std::vector<Tensor3> data;
    for (const auto& f : nodes)
        data.push_back(exact_tensor(rng, f.A.rows(), 4, 5, 2));
    const Vector a = partitioned_lm_step(data, nodes, 0.5, 0.5);
    const Vector b = lm_step(build_global_jacobian(nodes), build_residual(data, nodes), 0.5);
    EXPECT_LT((a - b).norm(), 1e-10 * b.norm());
}
