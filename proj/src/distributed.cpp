#include "dparafac/distributed.hpp"

namespace dparafac {

NodeState::NodeState(Index id_, Tensor3 observed_, Tensor3 clean_, Matrix A_, Matrix B_, Matrix C_)
    : id(id_), observed(std::move(observed_)), clean(std::move(clean_)), A(std::move(A_)), B(std::move(B_)),
      C(std::move(C_))
{
    if (observed.dims() != clean.dims())
        throw DimensionError("NodeState: observed and clean data differ in shape");
    const FactorTriple f{A, B, C};
    f.validate();
    if (f.dims() != observed.dims())
        throw DimensionError("NodeState: factor shapes do not match the data");
    X1 = unfold(observed, 1);
    X2 = unfold(observed, 2);
    X3 = unfold(observed, 3);
}

double nmse(std::span<const NodeState> nodes)
{
    std::vector<Tensor3> observed, clean;
    std::vector<FactorTriple> est;
    for (const auto& n : nodes) {
        observed.push_back(n.observed);
        clean.push_back(n.clean);
        est.push_back(n.factors());
    }
    return nmse(observed, clean, est);
}

DalsStats dals_stats_B(const NodeState& n)
{
    return {kr_gram(n.C, n.A), khatri_rao(n.C, n.A).transpose() * n.X2};
}

DalsStats dals_stats_C(const NodeState& n)
{
    return {kr_gram(n.A, n.B), khatri_rao(n.A, n.B).transpose() * n.X3};
}

Matrix dals_update_A(const NodeState& n)
{
    return solve_gram(kr_gram(n.B, n.C), khatri_rao(n.B, n.C).transpose() * n.X1).transpose();
}

namespace {

void check_network(const std::vector<NodeState>& nodes, const ConsensusProtocol& protocol)
{
    if (nodes.empty())
        throw InputError("distributed run: no nodes");
    if (static_cast<Index>(nodes.size()) != protocol.node_count())
        throw DimensionError("distributed run: node count differs from graph size");
    const Index J = nodes.front().B.rows(), K = nodes.front().C.rows(), R = nodes.front().A.cols();
    for (const auto& n : nodes)
        if (n.B.rows() != J || n.C.rows() != K || n.A.cols() != R)
            throw DimensionError("distributed run: J, K and R must agree across nodes");
}

Rng consensus_stream(const DistributedOptions& o, int iteration, std::uint64_t slot)
{
    return Rng::substream(o.noise_seed, {stream::link_noise, static_cast<std::uint64_t>(iteration), slot});
}

// Runs two consensus instances side by side on the `gram` and `cross` parts.
std::pair<NodeValues, NodeValues> average_stats(const std::vector<DalsStats>& stats,
                                                const ConsensusProtocol& protocol, Rng gram_rng, Rng cross_rng)
{
    NodeValues grams, crosses;
    for (const auto& s : stats) {
        grams.push_back(s.gram);
        crosses.push_back(s.cross);
    }
    return {protocol.run(std::move(grams), gram_rng), protocol.run(std::move(crosses), cross_rng)};
}

} // namespace

DistributedResult dals_run(std::vector<NodeState> nodes, const ConsensusProtocol& protocol,
                           const DistributedOptions& options)
{
    check_network(nodes, protocol);
    if (options.iterations < 1)
        throw InputError("dals_run: need at least one iteration");
    DistributedResult result;
    std::vector<DalsStats> stats(nodes.size());
    for (int it = 0; it < options.iterations; ++it) {
        for (std::size_t l = 0; l < nodes.size(); ++l)
            stats[l] = dals_stats_B(nodes[l]);
        auto [lambda, psi] = average_stats(stats, protocol, consensus_stream(options, it, 0),
                                           consensus_stream(options, it, 1));
        for (std::size_t l = 0; l < nodes.size(); ++l)
            nodes[l].B = solve_gram(lambda[l], psi[l]).transpose();

        for (std::size_t l = 0; l < nodes.size(); ++l)
            stats[l] = dals_stats_C(nodes[l]);
        auto [gamma, phi] = average_stats(stats, protocol, consensus_stream(options, it, 2),
                                          consensus_stream(options, it, 3));
        for (std::size_t l = 0; l < nodes.size(); ++l)
            nodes[l].C = solve_gram(gamma[l], phi[l]).transpose();

        for (auto& n : nodes)
            n.A = dals_update_A(n);
        result.nmse.push_back(nmse(nodes));
    }
    result.nodes = std::move(nodes);
    return result;
}

DlmBlocks dlm_local_blocks(const NodeState& n, double local_damping)
{
    const Index Il = n.A.rows(), J = n.B.rows(), K = n.C.rows(), R = n.A.cols();
    const Index S = R * (J + K);
    const FactorTriple f = n.factors();
    const NodeJacobian jac = build_dense_jacobian(f);
    const Vector r = build_residual(n.observed, f);

    DlmBlocks b;
    // H(a_l) = I_{I_l} kron (B^T B .* C^T C)
    const Matrix G = kr_gram(n.B, n.C) + local_damping * Matrix::Identity(R, R);
    const Matrix G_inv = inverse_gram(G);
    b.Ha = Matrix::Zero(R * Il, R * Il);
    b.Ha_inv = Matrix::Zero(R * Il, R * Il);
    for (Index i = 0; i < Il; ++i) {
        b.Ha.block(i * R, i * R, R, R) = G;
        b.Ha_inv.block(i * R, i * R, R, R) = G_inv;
    }

    // Hbb = I_J kron (C^T C .* A^T A), Hcc = I_K kron (A^T A .* B^T B); Hbc from the Jacobian.
    b.Hpbar = Matrix::Zero(S, S);
    const Matrix Gb = kr_gram(n.C, n.A);
    const Matrix Gc = kr_gram(n.A, n.B);
    for (Index j = 0; j < J; ++j)
        b.Hpbar.block(j * R, j * R, R, R) = Gb;
    for (Index k = 0; k < K; ++k)
        b.Hpbar.block(R * J + k * R, R * J + k * R, R, R) = Gc;
    const Matrix Hbc = jac.Jpbar.rightCols(R * K).transpose() * jac.Jpbar.leftCols(R * J);
    b.Hpbar.block(R * J, 0, R * K, R * J) = Hbc;
    b.Hpbar.block(0, R * J, R * J, R * K) = Hbc.transpose();

    b.Q = jac.Jpbar.transpose() * jac.Ja;
    b.grad_a = jac.Ja.transpose() * r;
    const Matrix QHinv = b.Q * b.Ha_inv;
    b.Theta = b.Hpbar - QHinv * b.Q.transpose();
    b.Theta = 0.5 * (b.Theta + b.Theta.transpose()).eval();
    b.xi = -(jac.Jpbar.transpose() * r - QHinv * b.grad_a);
    return b;
}

Vector dlm_global_step(const Matrix& Theta, const Vector& xi, double damping)
{
    if (Theta.rows() != Theta.cols() || Theta.rows() != xi.size())
        throw DimensionError("dlm_global_step: shape mismatch");
    if (!Theta.allFinite() || !xi.allFinite())
        throw SolverError("dlm_global_step: non-finite input");
    const Index S = Theta.rows();
    const Matrix system = 0.5 * (Theta + Theta.transpose()) + damping * Matrix::Identity(S, S);
    Eigen::LDLT<Matrix> ldlt(system);
    if (ldlt.info() != Eigen::Success)
        throw SolverError("dlm_global_step: factorization failed");
    Vector dp = ldlt.solve(xi);
    if (!dp.allFinite())
        throw SolverError("dlm_global_step: non-finite step");
    return dp;
}

Vector dlm_local_step(const DlmBlocks& blocks, const Vector& dpbar)
{
    if (dpbar.size() != blocks.Q.rows())
        throw DimensionError("dlm_local_step: step length mismatch");
    return -(blocks.Ha_inv * (blocks.Q.transpose() * dpbar + blocks.grad_a));
}

void dlm_apply(NodeState& n, const Vector& dpbar, const Vector& da)
{
    const Index R = n.A.cols();
    Vector pbar = pack_shared(n.B, n.C) + dpbar;
    unpack_shared(pbar, n.B, n.C);
    n.A = unpack_local(pack_local(n.A) + da, n.A.rows(), R);
}

DistributedResult dlm_run(std::vector<NodeState> nodes, const ConsensusProtocol& protocol,
                          const DistributedOptions& options)
{
    check_network(nodes, protocol);
    if (options.iterations < 1)
        throw InputError("dlm_run: need at least one iteration");
    DistributedResult result;
    if (options.agree_on_initial_shared) {
        // Every node applies the same consensus step to its own pbar, so
        // offsets between nodes' starting points would never decay.
        NodeValues pbars;
        for (const auto& n : nodes)
            pbars.push_back(pack_shared(n.B, n.C));
        const auto agreed = protocol.run(std::move(pbars), Rng::substream(options.noise_seed, {stream::link_noise, ~0ULL}));
        for (std::size_t l = 0; l < nodes.size(); ++l)
            unpack_shared(agreed[l].col(0), nodes[l].B, nodes[l].C);
    }
    std::vector<DlmBlocks> blocks(nodes.size());
    for (int it = 0; it < options.iterations; ++it) {
        NodeValues thetas, xis;
        for (std::size_t l = 0; l < nodes.size(); ++l) {
            blocks[l] = dlm_local_blocks(nodes[l], options.local_damping);
            thetas.push_back(blocks[l].Theta);
            xis.push_back(blocks[l].xi);
        }
        const NodeValues theta_avg = protocol.run(std::move(thetas), consensus_stream(options, it, 0));
        const NodeValues xi_avg = protocol.run(std::move(xis), consensus_stream(options, it, 1));
        for (std::size_t l = 0; l < nodes.size(); ++l) {
            const Vector dpbar = dlm_global_step(theta_avg[l], xi_avg[l].col(0), options.damping);
            const Vector da = dlm_local_step(blocks[l], dpbar);
            dlm_apply(nodes[l], dpbar, da);
        }
        result.nmse.push_back(nmse(nodes));
    }
    result.nodes = std::move(nodes);
    return result;
}

} // namespace dparafac
