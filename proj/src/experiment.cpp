#include "dparafac/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

namespace dparafac {

std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::als: return "als";
    case Algorithm::lm: return "lm";
    case Algorithm::dals: return "dals";
    case Algorithm::dlm: return "dlm";
    }
    return "?";
}

std::string to_string(ConsensusKind c)
{
    switch (c) {
    case ConsensusKind::constant_edge: return "constant-edge";
    case ConsensusKind::finite_time: return "finite-time";
    case ConsensusKind::seq_avg: return "seq-avg";
    }
    return "?";
}

Algorithm parse_algorithm(const std::string& s)
{
    if (s == "als") return Algorithm::als;
    if (s == "lm") return Algorithm::lm;
    if (s == "dals") return Algorithm::dals;
    if (s == "dlm") return Algorithm::dlm;
    throw ConfigError("unknown algorithm '" + s + "'");
}

ConsensusKind parse_consensus(const std::string& s)
{
    if (s == "constant-edge") return ConsensusKind::constant_edge;
    if (s == "finite-time") return ConsensusKind::finite_time;
    if (s == "seq-avg") return ConsensusKind::seq_avg;
    throw ConfigError("unknown consensus policy '" + s + "'");
}

Graph make_graph(const std::string& spec)
{
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw ConfigError("graph must be cycle:<L>, paley:<q> or file:<path>, got '" + spec + "'");
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    try {
        if (kind == "file")
            return read_edge_list_file(arg);
        std::size_t used = 0;
        const long long n = std::stoll(arg, &used);
        if (used != arg.size())
            throw ConfigError("bad graph size in '" + spec + "'");
        if (kind == "cycle")
            return cycle_graph(n);
        if (kind == "paley")
            return paley_graph(n);
    } catch (const GraphError& e) {
        throw ConfigError(e.what());
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const ConfigError*>(&e))
            throw;
        throw ConfigError("bad graph size in '" + spec + "'");
    }
    throw ConfigError("unknown graph kind '" + kind + "'");
}

std::vector<Index> resolve_node_rows(const ExperimentConfig& cfg, const Graph& g)
{
    if (cfg.iterations < 1)
        throw ConfigError("iters must be at least 1");
    if (cfg.runs < 1)
        throw ConfigError("runs must be at least 1");
    if (cfg.rank < 1)
        throw ConfigError("rank must be at least 1");
    if (cfg.J < 1 || cfg.K < 1)
        throw ConfigError("J and K must be positive");
    if (cfg.nc < 0)
        throw ConfigError("nc must be non-negative");
    if (cfg.ns < 1)
        throw ConfigError("ns must be at least 1");
    if (!(cfg.damping > 0.0))
        throw ConfigError("damping must be positive");
    if (cfg.snr_obs_db && !std::isfinite(*cfg.snr_obs_db))
        throw ConfigError("snr-obs must be finite");
    if (cfg.snr_link_db && !std::isfinite(*cfg.snr_link_db))
        throw ConfigError("snr-link must be finite");
    if (cfg.node_rows.empty())
        throw ConfigError("no node dimensions given");
    for (Index r : cfg.node_rows)
        if (r < 1)
            throw ConfigError("every I_l must be at least 1");

    const Index L = g.node_count();
    std::vector<Index> rows = cfg.node_rows;
    if (rows.size() == 1)
        rows.assign(static_cast<std::size_t>(L), rows.front());
    if (static_cast<Index>(rows.size()) != L)
        throw ConfigError("dims list has " + std::to_string(rows.size()) + " entries but the graph has " +
                          std::to_string(L) + " nodes");
    if (!g.is_connected() && (cfg.algorithm == Algorithm::dals || cfg.algorithm == Algorithm::dlm))
        throw ConfigError("graph is disconnected");
    return rows;
}

Scenario generate_scenario(std::uint64_t seed, std::span<const Index> node_rows, Index J, Index K, Index R)
{
    if (node_rows.empty() || J < 1 || K < 1 || R < 1)
        throw ConfigError("generate_scenario: invalid dimensions");
    Scenario s;
    s.node_rows.assign(node_rows.begin(), node_rows.end());
    Index I = 0;
    for (Index r : node_rows)
        I += r;

    Rng rng = Rng::substream(seed, {stream::scenario});
    s.truth.A = Matrix(I, R);
    Index offset = 0;
    for (Index r : node_rows) {
        s.truth.A.middleRows(offset, r) = rng.normal_matrix(r, R);
        offset += r;
    }
    const int kA = k_rank(s.truth.A);
    bool found = false;
    for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
        s.truth.B = rng.sign_matrix(J, R);
        s.truth.C = rng.sign_matrix(K, R);
        found = kA + k_rank(s.truth.B) + k_rank(s.truth.C) >= 2 * R + 2;
    }
    if (!found)
        throw ConfigError("generate_scenario: Kruskal's condition cannot be met for these dimensions and rank");

    for (const auto& f : split_factors(s.truth, node_rows))
        s.data.push_back(reconstruct(f));
    return s;
}

std::vector<Tensor3> add_observation_noise(std::span<const Tensor3> data, double snr_db, Rng& rng)
{
    std::vector<Tensor3> out;
    for (const auto& block : data) {
        Tensor3 noisy = block;
        const double power = block.squared_norm() / static_cast<double>(block.size());
        const double sigma = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
        for (double& x : noisy.data())
            x += sigma * rng.normal();
        out.push_back(std::move(noisy));
    }
    return out;
}

std::vector<FactorTriple> initial_factors(std::uint64_t seed, std::span<const Index> node_rows, Index J, Index K,
                                          Index R, bool identical_init)
{
    Rng shared = Rng::substream(seed, {stream::init_shared});
    const Matrix B0 = shared.normal_matrix(J, R);
    const Matrix C0 = shared.normal_matrix(K, R);
    std::vector<FactorTriple> out;
    for (std::size_t l = 0; l < node_rows.size(); ++l) {
        Rng node = Rng::substream(seed, {stream::init_node, l});
        FactorTriple f;
        f.A = node.normal_matrix(node_rows[l], R);
        if (identical_init) {
            f.B = B0;
            f.C = C0;
        } else {
            f.B = node.normal_matrix(J, R);
            f.C = node.normal_matrix(K, R);
        }
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

ConsensusProtocol make_protocol(const ExperimentConfig& cfg, const Graph& g)
{
    ConsensusPolicy policy;
    switch (cfg.consensus) {
    case ConsensusKind::constant_edge: policy = ConstantEdgePolicy{cfg.nc}; break;
    case ConsensusKind::finite_time: policy = FiniteTimePolicy{}; break;
    case ConsensusKind::seq_avg: policy = SequenceAveragingPolicy{cfg.ns}; break;
    }
    return ConsensusProtocol(g, policy, cfg.snr_link_db);
}

std::vector<double> centralized_trace(const ExperimentConfig& cfg, const Scenario& sc,
                                      const std::vector<Tensor3>& observed, const FactorTriple& init)
{
    const Tensor3 global = concat_mode1(observed);
    std::vector<FactorTriple> iterates;
    if (cfg.algorithm == Algorithm::als)
        iterates = als_fit(global, init, {cfg.iterations}).factors;
    else
        iterates = lm_fit(global, init, {.iterations = cfg.iterations, .damping = cfg.damping}).factors;
    std::vector<double> trace;
    for (const auto& f : iterates)
        trace.push_back(nmse(observed, sc.data, split_factors(f, sc.node_rows)));
    return trace;
}

} // namespace

std::vector<double> run_trial(const ExperimentConfig& cfg, const Graph& g, int trial)
{
    const auto rows = resolve_node_rows(cfg, g);
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(trial);
    const Scenario sc = generate_scenario(seed, rows, cfg.J, cfg.K, cfg.rank);
    std::vector<Tensor3> observed = sc.data;
    if (cfg.snr_obs_db) {
        Rng rng = Rng::substream(seed, {stream::observation_noise});
        observed = add_observation_noise(sc.data, *cfg.snr_obs_db, rng);
    }

    const bool centralized = cfg.algorithm == Algorithm::als || cfg.algorithm == Algorithm::lm;
    const auto init = initial_factors(seed, rows, cfg.J, cfg.K, cfg.rank, centralized || cfg.identical_init);

    std::vector<double> trace;
    try {
        if (centralized) {
            trace = centralized_trace(cfg, sc, observed, stack_factors(init));
        } else {
            std::vector<NodeState> nodes;
            for (std::size_t l = 0; l < rows.size(); ++l)
                nodes.emplace_back(static_cast<Index>(l), observed[l], sc.data[l], init[l].A, init[l].B, init[l].C);
            const DistributedOptions opts{.iterations = cfg.iterations, .damping = cfg.damping, .noise_seed = seed};
            const auto protocol = make_protocol(cfg, g);
            trace = cfg.algorithm == Algorithm::dals ? dals_run(std::move(nodes), protocol, opts).nmse
                                                     : dlm_run(std::move(nodes), protocol, opts).nmse;
        }
    } catch (const SolverError&) {
        trace.clear();
    }

    // Numerical failure (solver error or non-finite fit) counts as +inf from then on.
    constexpr double inf = std::numeric_limits<double>::infinity();
    bool failed = trace.empty();
    trace.resize(static_cast<std::size_t>(cfg.iterations), inf);
    for (double& v : trace) {
        if (!std::isfinite(v))
            failed = true;
        if (failed)
            v = inf;
    }
    return trace;
}

double median(std::vector<double> values)
{
    if (values.empty())
        throw InputError("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1)
        return values[n / 2];
    const double lo = values[n / 2 - 1], hi = values[n / 2];
    if (std::isinf(hi))
        return hi;
    return 0.5 * (lo + hi);
}

namespace {

std::string fmt_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fmt_rows(const std::vector<Index>& rows)
{
    std::string s;
    for (std::size_t i = 0; i < rows.size(); ++i)
        s += (i ? "," : "") + std::to_string(rows[i]);
    return s;
}

} // namespace

ResultTable run_experiment(const ExperimentConfig& cfg)
{
    const Graph g = make_graph(cfg.graph);
    const auto rows = resolve_node_rows(cfg, g);
    const bool distributed = cfg.algorithm == Algorithm::dals || cfg.algorithm == Algorithm::dlm;
    std::optional<ConsensusProtocol> protocol;
    if (distributed) {
        try {
            protocol = make_protocol(cfg, g);
        } catch (const GraphError& e) {
            throw ConfigError(e.what());
        }
    }
    // Fails early (as a config error) if Kruskal's condition is unreachable.
    (void)generate_scenario(cfg.seed, rows, cfg.J, cfg.K, cfg.rank);

    std::vector<std::vector<double>> traces(static_cast<std::size_t>(cfg.runs));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next++; t < cfg.runs; t = next++)
            traces[static_cast<std::size_t>(t)] = run_trial(cfg, g, t);
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(cfg.runs));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(worker);
    }

    ResultTable table;
    for (const auto& tr : traces)
        if (std::isinf(tr.back()))
            ++table.failed_trials;
    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<double> column;
        for (const auto& tr : traces)
            column.push_back(tr[static_cast<std::size_t>(it)]);
        table.median_nmse.push_back(median(std::move(column)));
    }

    auto& h = table.header;
    h.emplace_back("algorithm", to_string(cfg.algorithm));
    h.emplace_back("graph", cfg.graph);
    h.emplace_back("nodes", std::to_string(g.node_count()));
    h.emplace_back("dims_list", fmt_rows(rows));
    h.emplace_back("J", std::to_string(cfg.J));
    h.emplace_back("K", std::to_string(cfg.K));
    h.emplace_back("rank", std::to_string(cfg.rank));
    h.emplace_back("iters", std::to_string(cfg.iterations));
    h.emplace_back("runs", std::to_string(cfg.runs));
    h.emplace_back("seed", std::to_string(cfg.seed));
    if (distributed) {
        h.emplace_back("consensus", to_string(cfg.consensus));
        h.emplace_back("nc", std::to_string(cfg.nc));
        h.emplace_back("ns", std::to_string(cfg.ns));
        h.emplace_back("consensus_exchanges", std::to_string(protocol->exchanges_per_call()));
        h.emplace_back("identical_init", cfg.identical_init ? "true" : "false");
    }
    h.emplace_back("snr_obs_db", cfg.snr_obs_db ? fmt_double(*cfg.snr_obs_db) : "none");
    if (distributed)
        h.emplace_back("snr_link_db", cfg.snr_link_db ? fmt_double(*cfg.snr_link_db) : "none");
    if (cfg.algorithm == Algorithm::lm || cfg.algorithm == Algorithm::dlm)
        h.emplace_back("damping", fmt_double(cfg.damping));
    h.emplace_back("rng", "mt19937_64+splitmix64-substreams");
    h.emplace_back("failed_trials", std::to_string(table.failed_trials));
    return table;
}

void write_csv(const ResultTable& table, std::ostream& out)
{
    for (const auto& [k, v] : table.header)
        out << "# " << k << " = " << v << '\n';
    out << "iteration,median_nmse\n";
    char buf[64];
    for (std::size_t t = 0; t < table.median_nmse.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.12e\n", t + 1, table.median_nmse[t]);
        out << buf;
    }
}

void write_csv(const ResultTable& table, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    write_csv(table, out);
    if (!out)
        throw std::runtime_error("failed writing " + path);
}

} // namespace dparafac
