#include "dparafac/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace dparafac {

namespace {

std::pair<Index, Index> ordered(Index u, Index v)
{
    return u < v ? std::pair{u, v} : std::pair{v, u};
}

} // namespace

Graph::Graph(Index node_count, std::vector<std::pair<Index, Index>> edges) : node_count_(node_count)
{
    if (node_count < 1)
        throw GraphError("Graph: need at least one node");
    std::set<std::pair<Index, Index>> unique;
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || u >= node_count || v >= node_count)
            throw GraphError("Graph: node id out of range in edge (" + std::to_string(u) + ", " +
                             std::to_string(v) + ")");
        if (u == v)
            throw GraphError("Graph: self-loop on node " + std::to_string(u));
        unique.insert(ordered(u, v));
    }
    edges_.assign(unique.begin(), unique.end());
    adjacency_.resize(static_cast<std::size_t>(node_count));
    for (auto [u, v] : edges_) {
        adjacency_[static_cast<std::size_t>(u)].push_back(v);
        adjacency_[static_cast<std::size_t>(v)].push_back(u);
    }
    for (auto& nbrs : adjacency_)
        std::sort(nbrs.begin(), nbrs.end());
}

bool Graph::has_edge(Index u, Index v) const
{
    return std::binary_search(edges_.begin(), edges_.end(), ordered(u, v));
}

std::vector<Index> Graph::bfs_distances(Index source) const
{
    std::vector<Index> dist(static_cast<std::size_t>(node_count_), -1);
    std::queue<Index> frontier;
    dist[static_cast<std::size_t>(source)] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
        const Index u = frontier.front();
        frontier.pop();
        for (Index v : neighbors(u)) {
            auto& dv = dist[static_cast<std::size_t>(v)];
            if (dv < 0) {
                dv = dist[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
        }
    }
    return dist;
}

bool Graph::is_connected() const
{
    const auto dist = bfs_distances(0);
    return std::none_of(dist.begin(), dist.end(), [](Index d) { return d < 0; });
}

Index Graph::component_count() const
{
    std::vector<bool> seen(static_cast<std::size_t>(node_count_), false);
    Index count = 0;
    for (Index s = 0; s < node_count_; ++s) {
        if (seen[static_cast<std::size_t>(s)])
            continue;
        ++count;
        const auto dist = bfs_distances(s);
        for (Index v = 0; v < node_count_; ++v)
            if (dist[static_cast<std::size_t>(v)] >= 0)
                seen[static_cast<std::size_t>(v)] = true;
    }
    return count;
}

Index Graph::diameter() const
{
    Index best = 0;
    for (Index s = 0; s < node_count_; ++s) {
        for (Index d : bfs_distances(s)) {
            if (d < 0)
                return -1;
            best = std::max(best, d);
        }
    }
    return best;
}

Matrix Graph::laplacian() const
{
    Matrix Lap = Matrix::Zero(node_count_, node_count_);
    for (auto [u, v] : edges_) {
        Lap(u, v) = Lap(v, u) = -1.0;
        Lap(u, u) += 1.0;
        Lap(v, v) += 1.0;
    }
    return Lap;
}

Graph cycle_graph(Index L)
{
    if (L < 3)
        throw GraphError("cycle_graph: need at least 3 nodes");
    std::vector<std::pair<Index, Index>> edges;
    for (Index l = 0; l < L; ++l)
        edges.emplace_back(l, (l + 1) % L);
    return Graph(L, std::move(edges));
}

Graph complete_graph(Index L)
{
    std::vector<std::pair<Index, Index>> edges;
    for (Index u = 0; u < L; ++u)
        for (Index v = u + 1; v < L; ++v)
            edges.emplace_back(u, v);
    return Graph(L, std::move(edges));
}

Graph path_graph(Index L)
{
    std::vector<std::pair<Index, Index>> edges;
    for (Index l = 0; l + 1 < L; ++l)
        edges.emplace_back(l, l + 1);
    return Graph(L, std::move(edges));
}

namespace {

bool is_prime(Index n)
{
    if (n < 2)
        return false;
    for (Index d = 2; d * d <= n; ++d)
        if (n % d == 0)
            return false;
    return true;
}

// Finite field GF(p) or GF(p^2) = GF(p)[x] / (x^2 - nonresidue), element
// a + b x encoded as a + b p.
class SmallField {
public:
    SmallField(Index p, int degree) : p_(p), degree_(degree)
    {
        if (degree == 2) {
            // x^2 - n is irreducible iff n is a non-residue mod p; for
            // p = 3 (mod 4) this picks n = p - 1, i.e. x^2 + 1.
            std::vector<bool> residue(static_cast<std::size_t>(p), false);
            for (Index a = 1; a < p; ++a)
                residue[static_cast<std::size_t>(a * a % p)] = true;
            nonresidue_ = p - 1;
            if (residue[static_cast<std::size_t>(nonresidue_)])
                for (Index n = 2; n < p; ++n)
                    if (!residue[static_cast<std::size_t>(n)]) {
                        nonresidue_ = n;
                        break;
                    }
        }
    }

    Index order() const { return degree_ == 1 ? p_ : p_ * p_; }

    Index sub(Index x, Index y) const
    {
        if (degree_ == 1)
            return ((x - y) % p_ + p_) % p_;
        const Index a = ((x % p_ - y % p_) % p_ + p_) % p_;
        const Index b = ((x / p_ - y / p_) % p_ + p_) % p_;
        return a + b * p_;
    }

    Index mul(Index x, Index y) const
    {
        if (degree_ == 1)
            return x * y % p_;
        const Index a = x % p_, b = x / p_, c = y % p_, d = y / p_;
        const Index re = (a * c + b * d % p_ * nonresidue_) % p_;
        const Index im = (a * d + b * c) % p_;
        return re + im * p_;
    }

private:
    Index p_;
    int degree_;
    Index nonresidue_ = 0;
};

} // namespace

Graph paley_graph(Index q)
{
    if (q % 4 != 1)
        throw GraphError("paley_graph: q must be 1 mod 4, got " + std::to_string(q));
    int degree = 0;
    Index p = 0;
    if (is_prime(q)) {
        degree = 1;
        p = q;
    } else {
        for (Index r = 3; r * r <= q; ++r)
            if (r * r == q && is_prime(r)) {
                degree = 2;
                p = r;
            }
    }
    if (degree == 0)
        throw GraphError("paley_graph: unsupported order " + std::to_string(q) +
                         " (need a prime or the square of an odd prime)");

    const SmallField field(p, degree);
    std::vector<bool> square(static_cast<std::size_t>(q), false);
    for (Index x = 1; x < q; ++x)
        square[static_cast<std::size_t>(field.mul(x, x))] = true;

    std::vector<std::pair<Index, Index>> edges;
    for (Index x = 0; x < q; ++x)
        for (Index y = x + 1; y < q; ++y)
            if (square[static_cast<std::size_t>(field.sub(x, y))])
                edges.emplace_back(x, y);
    return Graph(q, std::move(edges));
}

Graph from_edge_list(std::string_view text, Index node_count)
{
    std::vector<std::pair<Index, Index>> edges;
    Index max_id = -1;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream fields(line);
        long long u = 0, v = 0;
        if (!(fields >> u)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            throw GraphError("edge list line " + std::to_string(lineno) + ": expected two node ids");
        }
        std::string rest;
        if (!(fields >> v) || (fields >> rest))
            throw GraphError("edge list line " + std::to_string(lineno) + ": expected two node ids");
        if (u < 0 || v < 0)
            throw GraphError("edge list line " + std::to_string(lineno) + ": negative node id");
        if (u == v)
            throw GraphError("edge list line " + std::to_string(lineno) + ": self-loop");
        edges.emplace_back(u, v);
        max_id = std::max<Index>(max_id, std::max<Index>(u, v));
    }
    if (node_count == 0)
        node_count = max_id + 1;
    if (node_count < 1)
        throw GraphError("edge list: empty graph");
    return Graph(node_count, std::move(edges));
}

Graph read_edge_list_file(const std::string& path, Index node_count)
{
    std::ifstream in(path);
    if (!in)
        throw GraphError("cannot open edge list " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_edge_list(buf.str(), node_count);
}

LaplacianSpectrum laplacian_spectrum(const Graph& g)
{
    Eigen::SelfAdjointEigenSolver<Matrix> solver(g.laplacian(), Eigen::EigenvaluesOnly);
    LaplacianSpectrum s;
    const auto& ev = solver.eigenvalues();
    s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end());

    const double scale = std::max(1.0, s.largest());
    const double tol = 1e-9 * scale;
    std::vector<double> cluster;
    auto flush = [&] {
        if (!cluster.empty()) {
            double sum = 0.0;
            for (double v : cluster)
                sum += v;
            s.distinct_nonzero.push_back(sum / static_cast<double>(cluster.size()));
            cluster.clear();
        }
    };
    for (double v : s.eigenvalues) {
        if (v <= tol)
            continue;
        if (!cluster.empty() && v - cluster.back() > tol)
            flush();
        cluster.push_back(v);
    }
    flush();
    return s;
}

ConsensusWeights constant_edge_weights(const Graph& g)
{
    if (!g.is_connected())
        throw GraphError("constant_edge_weights: graph is disconnected");
    if (g.node_count() < 2)
        throw GraphError("constant_edge_weights: need at least two nodes");
    const auto s = laplacian_spectrum(g);
    ConsensusWeights w;
    w.gamma = 2.0 / (s.algebraic_connectivity() + s.largest());
    w.W = Matrix::Identity(g.node_count(), g.node_count()) - w.gamma * g.laplacian();
    return w;
}

std::vector<double> finite_time_schedule(const LaplacianSpectrum& s)
{
    const double tol = 1e-9 * std::max(1.0, s.largest());
    const auto zeros = std::count_if(s.eigenvalues.begin(), s.eigenvalues.end(), [&](double v) { return v <= tol; });
    if (zeros != 1)
        throw GraphError("finite_time_schedule: graph is disconnected (lambda_2 is zero)");
    return s.distinct_nonzero;
}

} // namespace dparafac
