#pragma once

#include "dparafac/tensor.hpp"

#include <vector>

namespace dparafac {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solves Gram * X = rhs for a symmetric positive semidefinite Gram.
/// If the Gram is numerically singular, retries with Gram + eps*trace/n*I,
/// eps = 1e-12. Throws SolverError if that still fails or produces
/// non-finite values.
Matrix solve_gram(const Matrix& gram, const Matrix& rhs);

/// Inverse of a symmetric positive semidefinite matrix, with the same jitter rule.
Matrix inverse_gram(const Matrix& gram);

// ---------------------------------------------------------------------------
// Alternating least squares

struct AlsOptions {
    int iterations = 100;
    /// Stop early when |nmse_prev - nmse| / nmse_prev falls below this; 0 disables.
    double relative_tolerance = 0.0;
};

struct AlsTrace {
    /// factors[t] and cost[t] hold the state after sweep t + 1.
    std::vector<FactorTriple> factors;
    std::vector<double> cost;
    /// Cost after each B, C and A update, three entries per sweep.
    std::vector<double> half_step_cost;
};

/// One sweep updates B (mode-2 problem), then C (mode 3), then A (mode 1),
/// each by normal equations with Gram matrices from kr_gram.
FactorTriple als_sweep(const Tensor3& T, FactorTriple f, std::vector<double>* half_step_cost = nullptr);
AlsTrace als_fit(const Tensor3& T, const FactorTriple& init, const AlsOptions& options = {});

// ---------------------------------------------------------------------------
// Residuals, parameters, Jacobians

/// r[m] = x(i,j,k) - sum_r a_ir b_jr c_kr, m = (i*J + j)*K + k.
Vector build_residual(const Tensor3& data, const FactorTriple& f);
/// Node-ordered concatenation of per-node residuals.
Vector build_residual(std::span<const Tensor3> data, std::span<const FactorTriple> per_node);

/// p = [vec(A1^T); ...; vec(AL^T); vec(B^T); vec(C^T)]; vec(X^T) lists the
/// rows of X one after another.
Vector pack_parameters(std::span<const FactorTriple> per_node);
/// Inverse of pack_parameters; every node receives the same B and C.
std::vector<FactorTriple> unpack_parameters(const Vector& p, std::span<const Index> rows, Index J, Index K, Index R);

/// The shared tail [vec(B^T); vec(C^T)].
Vector pack_shared(const Matrix& B, const Matrix& C);
void unpack_shared(const Vector& pbar, Matrix& B, Matrix& C);
Vector pack_local(const Matrix& A);
Matrix unpack_local(const Vector& a, Index rows, Index R);

struct NodeJacobian {
    Matrix Ja;    ///< I_l*J*K x R*I_l, derivative w.r.t. vec(A_l^T)
    Matrix Jpbar; ///< I_l*J*K x R*(J+K), derivative w.r.t. [vec(B^T); vec(C^T)]
};

NodeJacobian build_dense_jacobian(const FactorTriple& node_factors);

/// Full Jacobian of the node-ordered residual w.r.t. the packed parameter vector.
Matrix build_global_jacobian(std::span<const FactorTriple> per_node);

/// Solves (J^T J + damping I) dp = -J^T r. damping may be 0 when J has full column rank.
Vector lm_step(const Matrix& J, const Vector& r, double damping);

// ---------------------------------------------------------------------------
// Levenberg-Marquardt

struct LmOptions {
    int iterations = 100;
    double damping = 1e-3;
    /// Multiplicative accept/reject damping update; off keeps damping fixed.
    bool adaptive_damping = false;
    double damping_factor = 10.0;
    double relative_tolerance = 0.0;
};

struct LmTrace {
    std::vector<FactorTriple> factors;
    std::vector<double> cost;
    std::vector<double> damping;
};

LmTrace lm_fit(const Tensor3& T, const FactorTriple& init, const LmOptions& options = {});

/// Solves (J^T J + D) dp = -J^T r over the node-partitioned parameter vector
/// with D = diag(local_damping on every a_l, shared_damping on pbar), using
/// a dense factorization of the whole system.
Vector partitioned_lm_step(std::span<const Tensor3> data, std::span<const FactorTriple> per_node,
                           double local_damping, double shared_damping);

/// Centralized reference for the distributed LM: iterates
/// partitioned_lm_step with local damping 0 and shared damping L * damping,
/// the same damping placement as the consensus-based version.
struct PartitionedLmTrace {
    std::vector<std::vector<FactorTriple>> factors;
};
PartitionedLmTrace partitioned_lm_fit(std::span<const Tensor3> data, const FactorTriple& init,
                                      std::span<const Index> rows, int iterations, double damping);

} // namespace dparafac
