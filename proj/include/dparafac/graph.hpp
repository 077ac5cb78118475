#pragma once

#include "dparafac/tensor.hpp"

#include <string_view>
#include <utility>
#include <vector>

namespace dparafac {

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Undirected simple graph on nodes 0..L-1.
class Graph {
public:
    Graph() = default;
    /// Duplicate edges are merged; self-loops and out-of-range ids throw.
    Graph(Index node_count, std::vector<std::pair<Index, Index>> edges);

    Index node_count() const { return node_count_; }
    /// Sorted, each pair stored with first < second.
    const std::vector<std::pair<Index, Index>>& edges() const { return edges_; }
    const std::vector<Index>& neighbors(Index l) const { return adjacency_[static_cast<std::size_t>(l)]; }
    Index degree(Index l) const { return static_cast<Index>(neighbors(l).size()); }

    bool has_edge(Index u, Index v) const;
    bool is_connected() const;
    Index component_count() const;
    /// Longest shortest path; -1 when disconnected.
    Index diameter() const;

    Matrix laplacian() const;

private:
    std::vector<Index> bfs_distances(Index source) const;

    Index node_count_ = 0;
    std::vector<std::pair<Index, Index>> edges_;
    std::vector<std::vector<Index>> adjacency_;
};

Graph cycle_graph(Index L);
Graph complete_graph(Index L);
Graph path_graph(Index L);

/// Paley graph on GF(q). Supports primes q = 1 (mod 4) and squares of odd primes.
Graph paley_graph(Index q);

/// "u v" per line, 0-based, '#' starts a comment. When node_count is 0 it
/// is inferred as the largest id + 1. Connectivity is not enforced here;
/// check Graph::is_connected() or let the consensus builders reject it.
Graph from_edge_list(std::string_view text, Index node_count = 0);
Graph read_edge_list_file(const std::string& path, Index node_count = 0);

struct LaplacianSpectrum {
    /// Ascending; eigenvalues.front() is 0 up to round-off.
    std::vector<double> eigenvalues;
    /// Distinct nonzero eigenvalues, ascending, merged with relative tolerance 1e-9.
    std::vector<double> distinct_nonzero;

    double algebraic_connectivity() const { return eigenvalues.size() > 1 ? eigenvalues[1] : 0.0; }
    double largest() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }
};

LaplacianSpectrum laplacian_spectrum(const Graph& g);

struct ConsensusWeights {
    Matrix W;
    double gamma = 0.0;
};

/// W = I - gamma * Laplacian with the fastest constant step 2 / (lambda_2 + lambda_L).
ConsensusWeights constant_edge_weights(const Graph& g);

/// Step sizes for the finite-time protocol: the distinct nonzero Laplacian
/// eigenvalues in ascending order. Empty for a single node.
std::vector<double> finite_time_schedule(const LaplacianSpectrum& s);

} // namespace dparafac
