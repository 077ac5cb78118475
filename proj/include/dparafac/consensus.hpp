#pragma once

#include "dparafac/graph.hpp"
#include "dparafac/random.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace dparafac {

/// One matrix per node, all the same shape.
using NodeValues = std::vector<Matrix>;

/// Additive white Gaussian noise on every received message.
///
/// For a message M the per-entry variance is
///   (||M||_F^2 / numel(M)) * 10^(-snr_db / 10),
/// drawn independently for each directed reception.
class LinkNoiseModel {
public:
    /// Noiseless links.
    LinkNoiseModel() = default;
    LinkNoiseModel(double snr_db, Rng rng);

    bool enabled() const { return enabled_; }
    double snr_db() const { return snr_db_; }

    /// Value seen by a receiver when `sent` is transmitted.
    Matrix receive(const Matrix& sent);

private:
    bool enabled_ = false;
    double snr_db_ = 0.0;
    Rng rng_;
};

/// R_l <- R_l + sum_{l' != l, W(l,l') != 0} W(l,l') (received R_l' - R_l).
/// Neighbourhoods are read off the nonzero pattern of W.
NodeValues consensus_step(const NodeValues& values, const Matrix& W, LinkNoiseModel& noise);

NodeValues run_constant_edge(NodeValues values, const Matrix& W, int iterations, LinkNoiseModel& noise);

/// Finite-time protocol: one step per scheduled Laplacian eigenvalue, with
/// step size 1 / eigenvalue. Throws GraphError when a scheduled value is not
/// a Laplacian eigenvalue of `g` or the schedule does not cover every
/// distinct nonzero eigenvalue.
NodeValues run_finite_time(NodeValues values, const Graph& g, const std::vector<double>& schedule,
                           LinkNoiseModel& noise);

/// Mean over `repeats` independent finite-time runs from the same start.
NodeValues run_sequence_averaging(const NodeValues& values, const Graph& g, const std::vector<double>& schedule,
                                  int repeats, LinkNoiseModel& noise);

Matrix exact_average(const NodeValues& values);

/// Largest Frobenius distance of a node value from the exact average.
double max_deviation(const NodeValues& values, const Matrix& average);

struct ConstantEdgePolicy {
    int iterations = 1;
};
struct FiniteTimePolicy {};
struct SequenceAveragingPolicy {
    int repeats = 1;
};

using ConsensusPolicy = std::variant<ConstantEdgePolicy, FiniteTimePolicy, SequenceAveragingPolicy>;

/// A graph plus a policy, with weights / schedule precomputed and validated.
class ConsensusProtocol {
public:
    ConsensusProtocol(Graph graph, ConsensusPolicy policy, std::optional<double> link_snr_db = std::nullopt);

    const Graph& graph() const { return graph_; }
    const ConsensusPolicy& policy() const { return policy_; }
    std::optional<double> link_snr_db() const { return link_snr_db_; }
    Index node_count() const { return graph_.node_count(); }

    /// Message exchanges per call (N_c; N_ft * N_s for sequence averaging).
    int exchanges_per_call() const;

    /// Runs the policy. `rng` is only used when link noise is configured.
    NodeValues run(NodeValues values, Rng rng) const;

private:
    NodeValues run_schedule(NodeValues values, LinkNoiseModel& noise) const;

    Graph graph_;
    ConsensusPolicy policy_;
    std::optional<double> link_snr_db_;
    Matrix constant_W_;
    std::vector<Matrix> schedule_W_;
};

} // namespace dparafac
