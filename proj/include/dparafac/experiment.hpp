#pragma once

#include "dparafac/distributed.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace dparafac {

/// Invalid or inconsistent experiment description (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Algorithm { als, lm, dals, dlm };
enum class ConsensusKind { constant_edge, finite_time, seq_avg };

std::string to_string(Algorithm a);
std::string to_string(ConsensusKind c);
Algorithm parse_algorithm(const std::string& s);
ConsensusKind parse_consensus(const std::string& s);

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::dals;
    /// "cycle:<L>", "paley:<q>" or "file:<path>".
    std::string graph = "paley:9";
    /// Per-node first-mode sizes; a single entry is broadcast to every node.
    std::vector<Index> node_rows{1};
    Index J = 4;
    Index K = 10;
    Index rank = 4;
    int iterations = 100;
    int runs = 100;
    std::uint64_t seed = 0;
    ConsensusKind consensus = ConsensusKind::finite_time;
    int nc = 1;
    int ns = 1;
    std::optional<double> snr_obs_db;
    std::optional<double> snr_link_db;
    double damping = 1e-3;
    /// All nodes start from the same B and C (the centralized start).
    bool identical_init = false;
    std::string output = "-";
};

/// Builds the graph named by cfg.graph.
Graph make_graph(const std::string& spec);

/// Checks ranges and graph/node consistency; returns per-node row counts.
std::vector<Index> resolve_node_rows(const ExperimentConfig& cfg, const Graph& g);

struct Scenario {
    std::vector<Tensor3> data;      ///< noiseless per-node blocks
    FactorTriple truth;             ///< A stacked over nodes
    std::vector<Index> node_rows;
};

/// B, C uniform on {-1, +1}, A standard normal; B and C are redrawn until the
/// stacked model satisfies Kruskal's condition (ConfigError after 1000 tries).
Scenario generate_scenario(std::uint64_t seed, std::span<const Index> node_rows, Index J, Index K, Index R);

/// Adds white Gaussian noise at the given SNR to every node's block.
std::vector<Tensor3> add_observation_noise(std::span<const Tensor3> data, double snr_db, Rng& rng);

/// Starting point for trial `seed`. Node l's A comes from its own substream;
/// B and C come from a shared substream (identical_init) or per-node ones.
std::vector<FactorTriple> initial_factors(std::uint64_t seed, std::span<const Index> node_rows, Index J, Index K,
                                          Index R, bool identical_init);

/// NMSE trace of one Monte-Carlo trial with seed cfg.seed + trial.
std::vector<double> run_trial(const ExperimentConfig& cfg, const Graph& g, int trial);

struct ResultTable {
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<double> median_nmse; ///< entry t is iteration t + 1
    int failed_trials = 0;
};

ResultTable run_experiment(const ExperimentConfig& cfg);

/// Median with the even-count convention (mean of the two middle values).
double median(std::vector<double> values);

/// '#'-prefixed "key = value" lines, then "iteration,median_nmse" and one
/// "%d,%.12e" row per iteration, "\n" line endings.
void write_csv(const ResultTable& table, std::ostream& out);
void write_csv(const ResultTable& table, const std::string& path);

} // namespace dparafac
