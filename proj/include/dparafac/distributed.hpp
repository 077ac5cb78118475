#pragma once

#include "dparafac/centralized.hpp"
#include "dparafac/consensus.hpp"

#include <cstdint>
#include <vector>

namespace dparafac {

/// What a single node knows: its slab of the data and its own copy of every
/// factor estimate.
struct NodeState {
    Index id = 0;
    Tensor3 observed;
    Tensor3 clean; ///< noiseless data, only used as the NMSE reference
    Matrix X1, X2, X3;
    Matrix A, B, C;

    /// Caches the unfoldings of `observed`.
    NodeState(Index id, Tensor3 observed, Tensor3 clean, Matrix A, Matrix B, Matrix C);

    FactorTriple factors() const { return {A, B, C}; }
};

double nmse(std::span<const NodeState> nodes);

// ---------------------------------------------------------------------------
// Distributed ALS

/// Local sufficient statistics whose network averages give the B and C updates.
struct DalsStats {
    Matrix gram; ///< Lambda_l (R x R) or Gamma_l (R x R)
    Matrix cross; ///< Psi_l (R x J) or Phi_l (R x K)
};

/// Lambda_l = kr_gram(C_l, A_l), Psi_l = (C_l kr A_l)^T X2_l.
DalsStats dals_stats_B(const NodeState& n);
/// Gamma_l = kr_gram(A_l, B_l), Phi_l = (A_l kr B_l)^T X3_l.
DalsStats dals_stats_C(const NodeState& n);
/// Least-squares A_l from the node's current B_l, C_l and X1_l.
Matrix dals_update_A(const NodeState& n);

struct DistributedOptions {
    int iterations = 100;
    double damping = 1e-3;          ///< DLM only
    double local_damping = 0.0;     ///< DLM only: added to H(a_l) before elimination
    std::uint64_t noise_seed = 0;   ///< seeds link-noise substreams
    /// DLM only: run one consensus call on the initial [vec(B^T); vec(C^T)]
    /// so that all nodes linearize around a common starting point.
    bool agree_on_initial_shared = true;
};

struct DistributedResult {
    std::vector<double> nmse; ///< one entry per outer iteration
    std::vector<NodeState> nodes;
};

/// Runs DALS in place. Per outer iteration: stats for B, consensus, B update,
/// stats for C, consensus, C update, local A update.
DistributedResult dals_run(std::vector<NodeState> nodes, const ConsensusProtocol& protocol,
                           const DistributedOptions& options);

// ---------------------------------------------------------------------------
// Distributed LM

struct DlmBlocks {
    Matrix Ha;       ///< J_a^T J_a (+ local damping)
    Matrix Ha_inv;
    Matrix Q;        ///< J_pbar^T J_a
    Matrix Hpbar;    ///< J_pbar^T J_pbar
    Matrix Theta;    ///< Hpbar - Q Ha^-1 Q^T
    Vector xi;       ///< -(J_pbar^T - Q Ha^-1 J_a^T) r
    Vector grad_a;   ///< J_a^T r
};

/// Builds the node's elimination blocks. Ha, Hbb and Hcc come from their
/// Hadamard closed forms; Q and Hbc from the dense Jacobian.
DlmBlocks dlm_local_blocks(const NodeState& n, double local_damping = 0.0);

/// Solves (Theta + damping I) dpbar = xi.
Vector dlm_global_step(const Matrix& Theta, const Vector& xi, double damping);

/// da = -Ha^-1 (Q^T dpbar + J_a^T r).
Vector dlm_local_step(const DlmBlocks& blocks, const Vector& dpbar);

/// Applies dpbar to the node's B, C and da to its A.
void dlm_apply(NodeState& n, const Vector& dpbar, const Vector& da);

DistributedResult dlm_run(std::vector<NodeState> nodes, const ConsensusProtocol& protocol,
                          const DistributedOptions& options);

} // namespace dparafac
