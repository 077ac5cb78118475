#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dparafac {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised whenever operand shapes do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by callers passing values that are well-shaped but meaningless
/// (zero-norm references, unsupported parameters, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Dims {
    Index I = 1;
    Index J = 1;
    Index K = 1;

    Index numel() const { return I * J * K; }
    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense third-order array. Entry (i, j, k) lives at offset i*J*K + j*K + k,
/// which is also the canonical residual ordering used by the LM code.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Dims dims);
    Tensor3(Dims dims, std::vector<double> data);

    const Dims& dims() const { return dims_; }
    Index size() const { return dims_.numel(); }

    double& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }
    double operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    /// Flattened view in canonical order.
    Eigen::Map<const Vector> as_vector() const { return {data_.data(), size()}; }
    Eigen::Map<Vector> as_vector() { return {data_.data(), size()}; }

    double squared_norm() const { return as_vector().squaredNorm(); }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    Index offset(Index i, Index j, Index k) const { return (i * dims_.J + j) * dims_.K + k; }

    Dims dims_{};
    std::vector<double> data_;
};

/// Factor matrices A (I x R), B (J x R), C (K x R).
struct FactorTriple {
    Matrix A;
    Matrix B;
    Matrix C;

    Index rank() const { return A.cols(); }
    Dims dims() const { return {A.rows(), B.rows(), C.rows()}; }
    /// Throws DimensionError unless all three share a positive column count.
    void validate() const;
};

/// Row-block Khatri-Rao product: block i is Y * diag(X.row(i)).
Matrix khatri_rao(const Matrix& X, const Matrix& Y);

/// (X kr Y)^T (X kr Y) computed as X^T X .* Y^T Y.
Matrix kr_gram(const Matrix& X, const Matrix& Y);

Tensor3 reconstruct(const FactorTriple& f);

/// Mode-m unfolding, m in {1, 2, 3}:
///   X1[j*K + k, i], X2[k*I + i, j], X3[i*J + j, k]  (0-based)
/// so that X1 = (B kr C) A^T, X2 = (C kr A) B^T, X3 = (A kr B) C^T.
Matrix unfold(const Tensor3& T, int mode);
Tensor3 fold(const Matrix& M, int mode, Dims dims);

/// Stacks tensors along the first mode. All blocks must share J and K.
Tensor3 concat_mode1(std::span<const Tensor3> blocks);
std::vector<Tensor3> split_mode1(const Tensor3& T, std::span<const Index> rows);

/// Kruskal rank: largest k such that every k columns are linearly
/// independent. Zero when any column vanishes.
int k_rank(const Matrix& M);

/// Numerical rank with threshold max(rows, cols) * eps * sigma_max.
int numerical_rank(const Matrix& M);

bool kruskal_holds(const Matrix& A, const Matrix& B, const Matrix& C, Index R);

/// Node-averaged normalized reconstruction error. `observed` may be noisy;
/// `clean` supplies the denominators.
double nmse(std::span<const Tensor3> observed, std::span<const Tensor3> clean,
            std::span<const FactorTriple> estimates);

/// Same with noiseless observations.
double nmse(std::span<const Tensor3> observed, std::span<const FactorTriple> estimates);

/// Rows of a stacked A belonging to each node, in node order.
std::vector<FactorTriple> split_factors(const FactorTriple& global, std::span<const Index> rows);
FactorTriple stack_factors(std::span<const FactorTriple> per_node);

/// 0.5 * squared residual norm.
double cost(const Tensor3& data, const FactorTriple& f);

} // namespace dparafac
