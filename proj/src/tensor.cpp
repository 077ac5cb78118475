#include "dparafac/tensor.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace dparafac {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw DimensionError(what);
}

} // namespace

Tensor3::Tensor3(Dims dims) : Tensor3(dims, std::vector<double>(static_cast<std::size_t>(dims.numel()), 0.0)) {}

Tensor3::Tensor3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data))
{
    require(dims.I >= 1 && dims.J >= 1 && dims.K >= 1, "Tensor3: dimensions must be positive");
    require(static_cast<Index>(data_.size()) == dims.numel(), "Tensor3: data length does not match dims");
}

void FactorTriple::validate() const
{
    require(A.cols() >= 1, "FactorTriple: rank must be at least 1");
    require(B.cols() == A.cols() && C.cols() == A.cols(), "FactorTriple: factor column counts differ");
}

Matrix khatri_rao(const Matrix& X, const Matrix& Y)
{
    require(X.cols() == Y.cols(), "khatri_rao: column counts differ");
    const Index J = Y.rows();
    Matrix out(X.rows() * J, X.cols());
    for (Index i = 0; i < X.rows(); ++i)
        out.middleRows(i * J, J) = Y * X.row(i).asDiagonal();
    return out;
}

Matrix kr_gram(const Matrix& X, const Matrix& Y)
{
    require(X.cols() == Y.cols(), "kr_gram: column counts differ");
    return (X.transpose() * X).cwiseProduct(Y.transpose() * Y);
}

Tensor3 reconstruct(const FactorTriple& f)
{
    f.validate();
    const Dims d = f.dims();
    Tensor3 T(d);
    // X3 = (A kr B) C^T, and X3's row-major layout is exactly the canonical one.
    const Matrix x3 = khatri_rao(f.A, f.B) * f.C.transpose();
    for (Index i = 0; i < d.I; ++i)
        for (Index j = 0; j < d.J; ++j)
            for (Index k = 0; k < d.K; ++k)
                T(i, j, k) = x3(i * d.J + j, k);
    return T;
}

Matrix unfold(const Tensor3& T, int mode)
{
    const Dims d = T.dims();
    Matrix M;
    switch (mode) {
    case 1:
        M.resize(d.J * d.K, d.I);
        for (Index i = 0; i < d.I; ++i)
            for (Index j = 0; j < d.J; ++j)
                for (Index k = 0; k < d.K; ++k)
                    M(j * d.K + k, i) = T(i, j, k);
        break;
    case 2:
        M.resize(d.K * d.I, d.J);
        for (Index i = 0; i < d.I; ++i)
            for (Index j = 0; j < d.J; ++j)
                for (Index k = 0; k < d.K; ++k)
                    M(k * d.I + i, j) = T(i, j, k);
        break;
    case 3:
        M.resize(d.I * d.J, d.K);
        for (Index i = 0; i < d.I; ++i)
            for (Index j = 0; j < d.J; ++j)
                for (Index k = 0; k < d.K; ++k)
                    M(i * d.J + j, k) = T(i, j, k);
        break;
    default:
        throw InputError("unfold: mode must be 1, 2 or 3");
    }
    return M;
}

Tensor3 fold(const Matrix& M, int mode, Dims dims)
{
    Tensor3 T(dims);
    const Dims d = dims;
    switch (mode) {
    case 1:
        require(M.rows() == d.J * d.K && M.cols() == d.I, "fold: shape mismatch for mode 1");
        for (Index i = 0; i < d.I; ++i)
            for (Index j = 0; j < d.J; ++j)
                for (Index k = 0; k < d.K; ++k)
                    T(i, j, k) = M(j * d.K + k, i);
        break;
    case 2:
        require(M.rows() == d.K * d.I && M.cols() == d.J, "fold: shape mismatch for mode 2");
        for (Index i = 0; i < d.I; ++i)
            for (Index j = 0; j < d.J; ++j)
                for (Index k = 0; k < d.K; ++k)
                    T(i, j, k) = M(k * d.I + i, j);
        break;
    case 3:
        require(M.rows() == d.I * d.J && M.cols() == d.K, "fold: shape mismatch for mode 3");
        for (Index i = 0; i < d.I; ++i)
            for (Index j = 0; j < d.J; ++j)
                for (Index k = 0; k < d.K; ++k)
                    T(i, j, k) = M(i * d.J + j, k);
        break;
    default:
        throw InputError("fold: mode must be 1, 2 or 3");
    }
    return T;
}

Tensor3 concat_mode1(std::span<const Tensor3> blocks)
{
    require(!blocks.empty(), "concat_mode1: no blocks");
    const Index J = blocks.front().dims().J;
    const Index K = blocks.front().dims().K;
    Index I = 0;
    std::vector<double> data;
    for (const auto& b : blocks) {
        require(b.dims().J == J && b.dims().K == K, "concat_mode1: J/K mismatch");
        I += b.dims().I;
        data.insert(data.end(), b.data().begin(), b.data().end());
    }
    return Tensor3({I, J, K}, std::move(data));
}

std::vector<Tensor3> split_mode1(const Tensor3& T, std::span<const Index> rows)
{
    const Dims d = T.dims();
    require(std::accumulate(rows.begin(), rows.end(), Index{0}) == d.I, "split_mode1: row counts do not sum to I");
    std::vector<Tensor3> out;
    auto it = T.data().begin();
    for (Index r : rows) {
        const auto n = static_cast<std::ptrdiff_t>(r * d.J * d.K);
        out.emplace_back(Dims{r, d.J, d.K}, std::vector<double>(it, it + n));
        it += n;
    }
    return out;
}

int numerical_rank(const Matrix& M)
{
    if (M.size() == 0)
        return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return 0;
    const double tol = static_cast<double>(std::max(M.rows(), M.cols())) *
                       std::numeric_limits<double>::epsilon() * s(0);
    return static_cast<int>((s.array() > tol).count());
}

namespace {

// Calls visit(subset) for every k-subset of {0..n-1}; stops early when visit returns false.
template <class Visit>
bool for_each_subset(int n, int k, Visit&& visit)
{
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        if (!visit(idx))
            return false;
        int p = k - 1;
        while (p >= 0 && idx[static_cast<std::size_t>(p)] == n - k + p)
            --p;
        if (p < 0)
            return true;
        ++idx[static_cast<std::size_t>(p)];
        for (int q = p + 1; q < k; ++q)
            idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
    }
}

} // namespace

int k_rank(const Matrix& M)
{
    const int n = static_cast<int>(M.cols());
    if (n == 0 || M.rows() == 0)
        return 0;
    for (int c = 0; c < n; ++c)
        if (M.col(c).isZero(0.0))
            return 0;

    // Every subset of size k independent implies the same for size k-1,
    // so grow k until the first failure.
    const int kmax = static_cast<int>(std::min<Index>(M.rows(), M.cols()));
    int best = 0;
    for (int k = 1; k <= kmax; ++k) {
        Matrix sub(M.rows(), k);
        const bool all_independent = for_each_subset(n, k, [&](const std::vector<int>& cols) {
            for (int c = 0; c < k; ++c)
                sub.col(c) = M.col(cols[static_cast<std::size_t>(c)]);
            return numerical_rank(sub) == k;
        });
        if (!all_independent)
            break;
        best = k;
    }
    return best;
}

bool kruskal_holds(const Matrix& A, const Matrix& B, const Matrix& C, Index R)
{
    require(A.cols() == R && B.cols() == R && C.cols() == R, "kruskal_holds: column counts differ from R");
    return k_rank(A) + k_rank(B) + k_rank(C) >= 2 * R + 2;
}

double nmse(std::span<const Tensor3> observed, std::span<const Tensor3> clean,
            std::span<const FactorTriple> estimates)
{
    require(observed.size() == estimates.size() && clean.size() == estimates.size(),
            "nmse: need one observation, reference and estimate per node");
    require(!observed.empty(), "nmse: no nodes");
    double total = 0.0;
    for (std::size_t l = 0; l < observed.size(); ++l) {
        require(observed[l].dims() == clean[l].dims(), "nmse: observation/reference shape mismatch");
        require(estimates[l].dims() == observed[l].dims(), "nmse: estimate shape mismatch");
        const double denom = clean[l].squared_norm();
        if (denom == 0.0)
            throw InputError("nmse: reference tensor has zero norm");
        const Tensor3 model = reconstruct(estimates[l]);
        total += (observed[l].as_vector() - model.as_vector()).squaredNorm() / denom;
    }
    return total / static_cast<double>(observed.size());
}

double nmse(std::span<const Tensor3> observed, std::span<const FactorTriple> estimates)
{
    return nmse(observed, observed, estimates);
}

std::vector<FactorTriple> split_factors(const FactorTriple& global, std::span<const Index> rows)
{
    global.validate();
    require(std::accumulate(rows.begin(), rows.end(), Index{0}) == global.A.rows(),
            "split_factors: row counts do not sum to rows of A");
    std::vector<FactorTriple> out;
    Index start = 0;
    for (Index r : rows) {
        out.push_back({global.A.middleRows(start, r), global.B, global.C});
        start += r;
    }
    return out;
}

FactorTriple stack_factors(std::span<const FactorTriple> per_node)
{
    require(!per_node.empty(), "stack_factors: no nodes");
    Index I = 0;
    for (const auto& f : per_node)
        I += f.A.rows();
    FactorTriple out{Matrix(I, per_node.front().rank()), per_node.front().B, per_node.front().C};
    Index start = 0;
    for (const auto& f : per_node) {
        require(f.rank() == out.rank(), "stack_factors: rank mismatch");
        out.A.middleRows(start, f.A.rows()) = f.A;
        start += f.A.rows();
    }
    return out;
}

double cost(const Tensor3& data, const FactorTriple& f)
{
    require(data.dims() == f.dims(), "cost: shape mismatch");
    return 0.5 * (data.as_vector() - reconstruct(f).as_vector()).squaredNorm();
}

} // namespace dparafac
