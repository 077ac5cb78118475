#include "dparafac/consensus.hpp"

#include <cmath>

namespace dparafac {

LinkNoiseModel::LinkNoiseModel(double snr_db, Rng rng) : enabled_(true), snr_db_(snr_db), rng_(rng)
{
    if (!std::isfinite(snr_db))
        throw InputError("LinkNoiseModel: SNR must be finite");
}

Matrix LinkNoiseModel::receive(const Matrix& sent)
{
    if (!enabled_ || sent.size() == 0)
        return sent;
    const double power = sent.squaredNorm() / static_cast<double>(sent.size());
    const double sigma = std::sqrt(power * std::pow(10.0, -snr_db_ / 10.0));
    return sent + sigma * rng_.normal_matrix(sent.rows(), sent.cols());
}

namespace {

void check_shapes(const NodeValues& values, Index L)
{
    if (static_cast<Index>(values.size()) != L)
        throw DimensionError("consensus: expected one value per node");
    for (const auto& v : values)
        if (v.rows() != values.front().rows() || v.cols() != values.front().cols())
            throw DimensionError("consensus: node values differ in shape");
}

} // namespace

NodeValues consensus_step(const NodeValues& values, const Matrix& W, LinkNoiseModel& noise)
{
    const Index L = W.rows();
    if (W.cols() != L)
        throw DimensionError("consensus_step: W must be square");
    check_shapes(values, L);

    NodeValues next = values;
    for (Index l = 0; l < L; ++l) {
        auto& out = next[static_cast<std::size_t>(l)];
        const auto& own = values[static_cast<std::size_t>(l)];
        for (Index m = 0; m < L; ++m) {
            const double w = W(l, m);
            if (m == l || w == 0.0)
                continue;
            out += w * (noise.receive(values[static_cast<std::size_t>(m)]) - own);
        }
    }
    return next;
}

NodeValues run_constant_edge(NodeValues values, const Matrix& W, int iterations, LinkNoiseModel& noise)
{
    if (iterations < 0)
        throw InputError("run_constant_edge: negative iteration count");
    for (int t = 0; t < iterations; ++t)
        values = consensus_step(values, W, noise);
    return values;
}

namespace {

std::vector<Matrix> schedule_weights(const Graph& g, const std::vector<double>& schedule)
{
    const auto spectrum = laplacian_spectrum(g);
    const auto& distinct = spectrum.distinct_nonzero;
    const double tol = 1e-9 * std::max(1.0, spectrum.largest());
    if (schedule.size() != distinct.size())
        throw GraphError("finite-time schedule length does not match the graph spectrum");
    std::vector<bool> used(distinct.size(), false);
    for (double s : schedule) {
        bool matched = false;
        for (std::size_t d = 0; d < distinct.size(); ++d)
            if (!used[d] && std::abs(distinct[d] - s) <= tol) {
                used[d] = matched = true;
                break;
            }
        if (!matched)
            throw GraphError("finite-time schedule entry is not a distinct Laplacian eigenvalue of the graph");
    }

    const Matrix Lap = g.laplacian();
    const Matrix I = Matrix::Identity(g.node_count(), g.node_count());
    std::vector<Matrix> weights;
    for (double s : schedule)
        weights.push_back(I - Lap / s);
    return weights;
}

NodeValues apply_schedule(NodeValues values, const std::vector<Matrix>& weights, LinkNoiseModel& noise)
{
    for (const auto& W : weights)
        values = consensus_step(values, W, noise);
    return values;
}

NodeValues averaged_runs(const NodeValues& values, const std::vector<Matrix>& weights, int repeats,
                         LinkNoiseModel& noise)
{
    if (repeats < 1)
        throw InputError("sequence averaging needs at least one repetition");
    NodeValues sum = apply_schedule(values, weights, noise);
    for (int s = 1; s < repeats; ++s) {
        const NodeValues run = apply_schedule(values, weights, noise);
        for (std::size_t l = 0; l < sum.size(); ++l)
            sum[l] += run[l];
    }
    for (auto& v : sum)
        v /= static_cast<double>(repeats);
    return sum;
}

} // namespace

NodeValues run_finite_time(NodeValues values, const Graph& g, const std::vector<double>& schedule,
                           LinkNoiseModel& noise)
{
    check_shapes(values, g.node_count());
    return apply_schedule(std::move(values), schedule_weights(g, schedule), noise);
}

NodeValues run_sequence_averaging(const NodeValues& values, const Graph& g, const std::vector<double>& schedule,
                                  int repeats, LinkNoiseModel& noise)
{
    check_shapes(values, g.node_count());
    return averaged_runs(values, schedule_weights(g, schedule), repeats, noise);
}

Matrix exact_average(const NodeValues& values)
{
    if (values.empty())
        throw InputError("exact_average: no values");
    Matrix sum = values.front();
    for (std::size_t l = 1; l < values.size(); ++l) {
        if (values[l].rows() != sum.rows() || values[l].cols() != sum.cols())
            throw DimensionError("exact_average: node values differ in shape");
        sum += values[l];
    }
    return sum / static_cast<double>(values.size());
}

double max_deviation(const NodeValues& values, const Matrix& average)
{
    double worst = 0.0;
    for (const auto& v : values)
        worst = std::max(worst, (v - average).norm());
    return worst;
}

ConsensusProtocol::ConsensusProtocol(Graph graph, ConsensusPolicy policy, std::optional<double> link_snr_db)
    : graph_(std::move(graph)), policy_(policy), link_snr_db_(link_snr_db)
{
    if (!graph_.is_connected())
        throw GraphError("consensus: graph is disconnected");
    if (const auto* ce = std::get_if<ConstantEdgePolicy>(&policy_)) {
        if (ce->iterations < 0)
            throw InputError("consensus: N_c must be non-negative");
        if (graph_.node_count() > 1)
            constant_W_ = constant_edge_weights(graph_).W;
        else
            constant_W_ = Matrix::Identity(1, 1);
    } else {
        if (const auto* sa = std::get_if<SequenceAveragingPolicy>(&policy_); sa && sa->repeats < 1)
            throw InputError("consensus: N_s must be at least 1");
        schedule_W_ = schedule_weights(graph_, finite_time_schedule(laplacian_spectrum(graph_)));
    }
}

int ConsensusProtocol::exchanges_per_call() const
{
    const int ft = static_cast<int>(schedule_W_.size());
    return std::visit(
        [&](const auto& p) -> int {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantEdgePolicy>)
                return p.iterations;
            else if constexpr (std::is_same_v<P, FiniteTimePolicy>)
                return ft;
            else
                return ft * p.repeats;
        },
        policy_);
}

NodeValues ConsensusProtocol::run(NodeValues values, Rng rng) const
{
    check_shapes(values, graph_.node_count());
    LinkNoiseModel noise = link_snr_db_ ? LinkNoiseModel(*link_snr_db_, rng) : LinkNoiseModel();
    return run_schedule(std::move(values), noise);
}

NodeValues ConsensusProtocol::run_schedule(NodeValues values, LinkNoiseModel& noise) const
{
    return std::visit(
        [&](const auto& p) -> NodeValues {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantEdgePolicy>)
                return run_constant_edge(std::move(values), constant_W_, p.iterations, noise);
            else if constexpr (std::is_same_v<P, FiniteTimePolicy>)
                return apply_schedule(std::move(values), schedule_W_, noise);
            else
                return averaged_runs(values, schedule_W_, p.repeats, noise);
        },
        policy_);
}

} // namespace dparafac
