#include "dparafac/centralized.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace dparafac {

namespace {

constexpr double kJitter = 1e-12;

Matrix symmetrized(const Matrix& M)
{
    return 0.5 * (M + M.transpose());
}

bool finite(const Matrix& M)
{
    return M.allFinite();
}

} // namespace

Matrix solve_gram(const Matrix& gram, const Matrix& rhs)
{
    if (gram.rows() != gram.cols() || gram.rows() != rhs.rows())
        throw DimensionError("solve_gram: shape mismatch");
    const Matrix G = symmetrized(gram);
    const Index n = G.rows();
    if (n == 0)
        return Matrix(0, rhs.cols());

    Eigen::LDLT<Matrix> ldlt(G);
    const double eps = std::numeric_limits<double>::epsilon();
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > static_cast<double>(n) * eps) {
        Matrix X = ldlt.solve(rhs);
        if (finite(X))
            return X;
    }

    const double trace = G.trace();
    const double shift = kJitter * (trace > 0.0 ? trace / static_cast<double>(n) : 1.0);
    Eigen::LDLT<Matrix> jittered(G + shift * Matrix::Identity(n, n));
    if (jittered.info() != Eigen::Success)
        throw SolverError("solve_gram: factorization failed");
    Matrix X = jittered.solve(rhs);
    if (!finite(X))
        throw SolverError("solve_gram: non-finite solution");
    return X;
}

Matrix inverse_gram(const Matrix& gram)
{
    return solve_gram(gram, Matrix::Identity(gram.rows(), gram.cols()));
}

FactorTriple als_sweep(const Tensor3& T, FactorTriple f, std::vector<double>* half_step_cost)
{
    f.validate();
    if (T.dims() != f.dims())
        throw DimensionError("als_sweep: factor shapes do not match the tensor");
    const Matrix X1 = unfold(T, 1);
    const Matrix X2 = unfold(T, 2);
    const Matrix X3 = unfold(T, 3);

    // X2 = (C kr A) B^T
    f.B = solve_gram(kr_gram(f.C, f.A), khatri_rao(f.C, f.A).transpose() * X2).transpose();
    if (half_step_cost)
        half_step_cost->push_back(cost(T, f));
    // X3 = (A kr B) C^T
    f.C = solve_gram(kr_gram(f.A, f.B), khatri_rao(f.A, f.B).transpose() * X3).transpose();
    if (half_step_cost)
        half_step_cost->push_back(cost(T, f));
    // X1 = (B kr C) A^T
    f.A = solve_gram(kr_gram(f.B, f.C), khatri_rao(f.B, f.C).transpose() * X1).transpose();
    if (half_step_cost)
        half_step_cost->push_back(cost(T, f));
    return f;
}

AlsTrace als_fit(const Tensor3& T, const FactorTriple& init, const AlsOptions& options)
{
    if (options.iterations < 1)
        throw InputError("als_fit: need at least one iteration");
    AlsTrace trace;
    FactorTriple f = init;
    for (int it = 0; it < options.iterations; ++it) {
        f = als_sweep(T, std::move(f), &trace.half_step_cost);
        trace.factors.push_back(f);
        trace.cost.push_back(cost(T, f));
        const auto n = trace.cost.size();
        if (options.relative_tolerance > 0.0 && n >= 2) {
            const double prev = trace.cost[n - 2];
            if (prev > 0.0 && std::abs(prev - trace.cost[n - 1]) / prev < options.relative_tolerance)
                break;
        }
    }
    return trace;
}

Vector build_residual(const Tensor3& data, const FactorTriple& f)
{
    if (data.dims() != f.dims())
        throw DimensionError("build_residual: factor shapes do not match the data");
    return data.as_vector() - reconstruct(f).as_vector();
}

Vector build_residual(std::span<const Tensor3> data, std::span<const FactorTriple> per_node)
{
    if (data.size() != per_node.size())
        throw DimensionError("build_residual: need one factor set per node");
    Index total = 0;
    for (const auto& d : data)
        total += d.size();
    Vector r(total);
    Index offset = 0;
    for (std::size_t l = 0; l < data.size(); ++l) {
        r.segment(offset, data[l].size()) = build_residual(data[l], per_node[l]);
        offset += data[l].size();
    }
    return r;
}

Vector pack_local(const Matrix& A)
{
    Vector a(A.size());
    for (Index i = 0; i < A.rows(); ++i)
        a.segment(i * A.cols(), A.cols()) = A.row(i).transpose();
    return a;
}

Matrix unpack_local(const Vector& a, Index rows, Index R)
{
    if (a.size() != rows * R)
        throw DimensionError("unpack_local: length mismatch");
    Matrix A(rows, R);
    for (Index i = 0; i < rows; ++i)
        A.row(i) = a.segment(i * R, R).transpose();
    return A;
}

Vector pack_shared(const Matrix& B, const Matrix& C)
{
    Vector p(B.size() + C.size());
    p << pack_local(B), pack_local(C);
    return p;
}

void unpack_shared(const Vector& pbar, Matrix& B, Matrix& C)
{
    const Index R = B.cols();
    if (C.cols() != R || pbar.size() != R * (B.rows() + C.rows()))
        throw DimensionError("unpack_shared: length mismatch");
    B = unpack_local(pbar.head(B.size()), B.rows(), R);
    C = unpack_local(pbar.tail(C.size()), C.rows(), R);
}

Vector pack_parameters(std::span<const FactorTriple> per_node)
{
    if (per_node.empty())
        throw InputError("pack_parameters: no nodes");
    Index total = 0;
    for (const auto& f : per_node)
        total += f.A.size();
    const auto& shared = per_node.front();
    Vector p(total + shared.B.size() + shared.C.size());
    Index offset = 0;
    for (const auto& f : per_node) {
        p.segment(offset, f.A.size()) = pack_local(f.A);
        offset += f.A.size();
    }
    p.tail(shared.B.size() + shared.C.size()) = pack_shared(shared.B, shared.C);
    return p;
}

std::vector<FactorTriple> unpack_parameters(const Vector& p, std::span<const Index> rows, Index J, Index K, Index R)
{
    const Index I = std::accumulate(rows.begin(), rows.end(), Index{0});
    if (p.size() != R * (I + J + K))
        throw DimensionError("unpack_parameters: length mismatch");
    Matrix B(J, R), C(K, R);
    unpack_shared(p.tail(R * (J + K)), B, C);
    std::vector<FactorTriple> out;
    Index offset = 0;
    for (Index r : rows) {
        out.push_back({unpack_local(p.segment(offset, r * R), r, R), B, C});
        offset += r * R;
    }
    return out;
}

NodeJacobian build_dense_jacobian(const FactorTriple& f)
{
    f.validate();
    const auto [I, J, K] = f.dims();
    const Index R = f.rank();
    NodeJacobian jac{Matrix::Zero(I * J * K, R * I), Matrix::Zero(I * J * K, R * (J + K))};
    for (Index i = 0; i < I; ++i)
        for (Index j = 0; j < J; ++j)
            for (Index k = 0; k < K; ++k) {
                const Index m = (i * J + j) * K + k;
                for (Index r = 0; r < R; ++r) {
                    jac.Ja(m, i * R + r) = -f.B(j, r) * f.C(k, r);
                    jac.Jpbar(m, j * R + r) = -f.A(i, r) * f.C(k, r);
                    jac.Jpbar(m, R * J + k * R + r) = -f.A(i, r) * f.B(j, r);
                }
            }
    return jac;
}

Matrix build_global_jacobian(std::span<const FactorTriple> per_node)
{
    if (per_node.empty())
        throw InputError("build_global_jacobian: no nodes");
    const Index R = per_node.front().rank();
    const Index shared = R * (per_node.front().B.rows() + per_node.front().C.rows());
    Index rows = 0, local = 0;
    for (const auto& f : per_node) {
        rows += f.A.rows() * f.B.rows() * f.C.rows();
        local += f.A.size();
    }
    Matrix J = Matrix::Zero(rows, local + shared);
    Index row = 0, col = 0;
    for (const auto& f : per_node) {
        const NodeJacobian nj = build_dense_jacobian(f);
        J.block(row, col, nj.Ja.rows(), nj.Ja.cols()) = nj.Ja;
        J.block(row, local, nj.Jpbar.rows(), shared) = nj.Jpbar;
        row += nj.Ja.rows();
        col += nj.Ja.cols();
    }
    return J;
}

Vector lm_step(const Matrix& J, const Vector& r, double damping)
{
    if (J.rows() != r.size())
        throw DimensionError("lm_step: Jacobian rows do not match residual length");
    if (damping < 0.0)
        throw InputError("lm_step: damping must be non-negative");
    const Index F = J.cols();
    const Matrix system = J.transpose() * J + damping * Matrix::Identity(F, F);
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success)
        throw SolverError("lm_step: damped normal equations are not positive definite");
    Vector dp = llt.solve(-(J.transpose() * r));
    if (!dp.allFinite())
        throw SolverError("lm_step: non-finite step");
    return dp;
}

LmTrace lm_fit(const Tensor3& T, const FactorTriple& init, const LmOptions& options)
{
    if (options.iterations < 1)
        throw InputError("lm_fit: need at least one iteration");
    if (!(options.damping > 0.0))
        throw InputError("lm_fit: damping must be positive");
    init.validate();
    const auto [I, J, K] = init.dims();
    const Index R = init.rank();
    const std::array<Index, 1> rows{I};

    LmTrace trace;
    FactorTriple f = init;
    double damping = options.damping;
    double current_cost = cost(T, f);
    for (int it = 0; it < options.iterations; ++it) {
        const std::array<FactorTriple, 1> nodes{f};
        const Vector r = build_residual(T, f);
        const Matrix Jac = build_global_jacobian(nodes);
        const Vector dp = lm_step(Jac, r, damping);
        FactorTriple candidate = unpack_parameters(pack_parameters(nodes) + dp, rows, J, K, R).front();
        const double candidate_cost = cost(T, candidate);

        if (options.adaptive_damping) {
            if (candidate_cost < current_cost) {
                f = std::move(candidate);
                current_cost = candidate_cost;
                damping /= options.damping_factor;
            } else {
                damping *= options.damping_factor;
            }
        } else {
            f = std::move(candidate);
            current_cost = candidate_cost;
        }
        trace.factors.push_back(f);
        trace.cost.push_back(current_cost);
        trace.damping.push_back(damping);
        const auto n = trace.cost.size();
        if (options.relative_tolerance > 0.0 && n >= 2) {
            const double prev = trace.cost[n - 2];
            if (prev > 0.0 && std::abs(prev - trace.cost[n - 1]) / prev < options.relative_tolerance)
                break;
        }
    }
    return trace;
}

Vector partitioned_lm_step(std::span<const Tensor3> data, std::span<const FactorTriple> per_node,
                           double local_damping, double shared_damping)
{
    const Matrix Jac = build_global_jacobian(per_node);
    const Vector r = build_residual(data, per_node);
    const Index F = Jac.cols();
    const auto& front = per_node.front();
    const Index shared = front.rank() * (front.B.rows() + front.C.rows());
    Matrix system = Jac.transpose() * Jac;
    system.diagonal().head(F - shared).array() += local_damping;
    system.diagonal().tail(shared).array() += shared_damping;
    Eigen::LDLT<Matrix> ldlt(system);
    if (ldlt.info() != Eigen::Success)
        throw SolverError("partitioned_lm_step: factorization failed");
    Vector dp = ldlt.solve(-(Jac.transpose() * r));
    if (!dp.allFinite())
        throw SolverError("partitioned_lm_step: non-finite step");
    return dp;
}

PartitionedLmTrace partitioned_lm_fit(std::span<const Tensor3> data, const FactorTriple& init,
                                      std::span<const Index> rows, int iterations, double damping)
{
    if (iterations < 1)
        throw InputError("partitioned_lm_fit: need at least one iteration");
    std::vector<FactorTriple> nodes = split_factors(init, rows);
    const Index J = init.B.rows(), K = init.C.rows(), R = init.rank();
    const double shared_damping = static_cast<double>(nodes.size()) * damping;
    PartitionedLmTrace trace;
    for (int it = 0; it < iterations; ++it) {
        const Vector dp = partitioned_lm_step(data, nodes, 0.0, shared_damping);
        nodes = unpack_parameters(pack_parameters(nodes) + dp, rows, J, K, R);
        trace.factors.push_back(nodes);
    }
    return trace;
}

} // namespace dparafac
