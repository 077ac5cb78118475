// Python bindings. Tensors cross the boundary as C-ordered float64 arrays of
// shape (I, J, K), which is exactly the library's canonical layout.

#include "dparafac/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace dparafac;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor3 to_tensor(const Array3& a)
{
    if (a.ndim() != 3)
        throw DimensionError("expected a 3-D array");
    const Dims d{a.shape(0), a.shape(1), a.shape(2)};
    return Tensor3(d, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const Tensor3& T)
{
    const auto& d = T.dims();
    py::array_t<double> out({d.I, d.J, d.K});
    std::copy(T.data().begin(), T.data().end(), out.mutable_data());
    return out;
}

std::vector<Tensor3> to_tensors(const std::vector<Array3>& arrays)
{
    std::vector<Tensor3> out;
    for (const auto& a : arrays)
        out.push_back(to_tensor(a));
    return out;
}

py::tuple factors_tuple(const FactorTriple& f)
{
    return py::make_tuple(f.A, f.B, f.C);
}

ConsensusPolicy make_policy(const std::string& method, int nc, int ns)
{
    switch (parse_consensus(method)) {
    case ConsensusKind::constant_edge:
        return ConstantEdgePolicy{nc};
    case ConsensusKind::seq_avg:
        return SequenceAveragingPolicy{ns};
    case ConsensusKind::finite_time:
        break;
    }
    return FiniteTimePolicy{};
}

} // namespace

PYBIND11_MODULE(_dparafac, m)
{
    m.doc() = "Distributed PARAFAC decomposition over consensus networks";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<GraphError>(m, "GraphError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_ArithmeticError);

    // tensor algebra
    m.def("khatri_rao", &khatri_rao, py::arg("X"), py::arg("Y"));
    m.def("kr_gram", &kr_gram, py::arg("X"), py::arg("Y"));
    m.def(
        "reconstruct", [](const Matrix& A, const Matrix& B, const Matrix& C) { return to_array(reconstruct({A, B, C})); },
        py::arg("A"), py::arg("B"), py::arg("C"));
    m.def(
        "unfold", [](const Array3& T, int mode) { return unfold(to_tensor(T), mode); }, py::arg("T"), py::arg("mode"));
    m.def(
        "fold",
        [](const Matrix& M, int mode, std::array<Index, 3> shape) {
            return to_array(fold(M, mode, {shape[0], shape[1], shape[2]}));
        },
        py::arg("M"), py::arg("mode"), py::arg("shape"));
    m.def("k_rank", &k_rank, py::arg("M"));
    m.def("kruskal_holds", &kruskal_holds, py::arg("A"), py::arg("B"), py::arg("C"), py::arg("R"));
    m.def(
        "nmse",
        [](const std::vector<Array3>& observed, const std::vector<Array3>& estimate) {
            const auto obs = to_tensors(observed), est = to_tensors(estimate);
            double num = 0.0, den = 0.0;
            for (std::size_t l = 0; l < obs.size(); ++l) {
                if (l >= est.size() || !(obs[l].dims() == est[l].dims()))
                    throw DimensionError("nmse: block shapes differ");
                num += (obs[l].as_vector() - est[l].as_vector()).squaredNorm() / obs[l].squared_norm();
                den += 1.0;
            }
            if (obs.empty())
                throw InputError("nmse: no blocks");
            return num / den;
        },
        py::arg("observed"), py::arg("estimate"),
        "Mean over blocks of ||X_l - Xhat_l||^2 / ||X_l||^2.");

    // graphs
    py::class_<Graph>(m, "Graph")
        .def(py::init<Index, std::vector<std::pair<Index, Index>>>(), py::arg("node_count"), py::arg("edges"))
        .def_property_readonly("node_count", &Graph::node_count)
        .def_property_readonly("edges", &Graph::edges)
        .def("neighbors", &Graph::neighbors)
        .def("degree", &Graph::degree)
        .def("has_edge", &Graph::has_edge)
        .def("is_connected", &Graph::is_connected)
        .def("diameter", &Graph::diameter)
        .def("laplacian", &Graph::laplacian)
        .def("__repr__", [](const Graph& g) {
            std::ostringstream s;
            s << "<Graph nodes=" << g.node_count() << " edges=" << g.edges().size() << ">";
            return s.str();
        });
    m.def("cycle_graph", &cycle_graph, py::arg("L"));
    m.def("complete_graph", &complete_graph, py::arg("L"));
    m.def("path_graph", &path_graph, py::arg("L"));
    m.def("paley_graph", &paley_graph, py::arg("q"));
    m.def(
        "from_edge_list", [](const std::string& text, Index n) { return from_edge_list(text, n); }, py::arg("text"),
        py::arg("node_count") = 0);
    m.def("make_graph", &make_graph, py::arg("spec"));
    m.def(
        "laplacian_eigenvalues", [](const Graph& g) { return laplacian_spectrum(g).eigenvalues; }, py::arg("graph"));
    m.def(
        "constant_edge_weights",
        [](const Graph& g) {
            const auto w = constant_edge_weights(g);
            return py::make_tuple(w.W, w.gamma);
        },
        py::arg("graph"), "Returns (W, gamma) with W = I - gamma * Laplacian.");
    m.def(
        "finite_time_schedule", [](const Graph& g) { return finite_time_schedule(laplacian_spectrum(g)); },
        py::arg("graph"));

    // consensus
    m.def(
        "consensus",
        [](const std::vector<Matrix>& values, const Graph& g, const std::string& method, int nc, int ns,
           std::optional<double> snr_link_db, std::uint64_t seed) {
            const ConsensusProtocol p(g, make_policy(method, nc, ns), snr_link_db);
            return p.run(values, Rng(seed));
        },
        py::arg("values"), py::arg("graph"), py::arg("method") = "finite-time", py::arg("nc") = 1, py::arg("ns") = 1,
        py::arg("snr_link_db") = py::none(), py::arg("seed") = 0,
        "Runs one consensus call over per-node matrices and returns each node's result.");
    m.def("exact_average", &exact_average, py::arg("values"));

    // centralized fits
    m.def(
        "als_fit",
        [](const Array3& T, const Matrix& A, const Matrix& B, const Matrix& C, int iterations) {
            const AlsTrace t = als_fit(to_tensor(T), {A, B, C}, {.iterations = iterations});
            return py::make_tuple(factors_tuple(t.factors.back()), t.cost);
        },
        py::arg("T"), py::arg("A"), py::arg("B"), py::arg("C"), py::arg("iterations") = 100,
        "Returns ((A, B, C), cost per iteration).");
    m.def(
        "lm_fit",
        [](const Array3& T, const Matrix& A, const Matrix& B, const Matrix& C, int iterations, double damping,
           bool adaptive) {
            const LmTrace t = lm_fit(to_tensor(T), {A, B, C},
                                     {.iterations = iterations, .damping = damping, .adaptive_damping = adaptive});
            return py::make_tuple(factors_tuple(t.factors.back()), t.cost);
        },
        py::arg("T"), py::arg("A"), py::arg("B"), py::arg("C"), py::arg("iterations") = 100, py::arg("damping") = 1e-3,
        py::arg("adaptive_damping") = false, "Returns ((A, B, C), cost per iteration).");

    // experiments
    m.def(
        "generate_scenario",
        [](std::uint64_t seed, const std::vector<Index>& rows, Index J, Index K, Index R) {
            const Scenario sc = generate_scenario(seed, rows, J, K, R);
            py::list blocks;
            for (const auto& T : sc.data)
                blocks.append(to_array(T));
            return py::make_tuple(factors_tuple(sc.truth), blocks);
        },
        py::arg("seed"), py::arg("node_rows"), py::arg("J"), py::arg("K"), py::arg("R"),
        "Returns ((A, B, C) ground truth, list of noiseless per-node tensors).");
    m.def(
        "run_experiment",
        [](const std::string& algorithm, const std::string& graph, const std::vector<Index>& node_rows, Index J, Index K,
           Index rank, int iterations, int runs, std::uint64_t seed, const std::string& consensus, int nc, int ns,
           std::optional<double> snr_obs_db, std::optional<double> snr_link_db, double damping, bool identical_init) {
            ExperimentConfig cfg;
            cfg.algorithm = parse_algorithm(algorithm);
            cfg.graph = graph;
            cfg.node_rows = node_rows;
            cfg.J = J;
            cfg.K = K;
            cfg.rank = rank;
            cfg.iterations = iterations;
            cfg.runs = runs;
            cfg.seed = seed;
            cfg.consensus = parse_consensus(consensus);
            cfg.nc = nc;
            cfg.ns = ns;
            cfg.snr_obs_db = snr_obs_db;
            cfg.snr_link_db = snr_link_db;
            cfg.damping = damping;
            cfg.identical_init = identical_init;
            ResultTable table;
            {
                py::gil_scoped_release release;
                table = run_experiment(cfg);
            }
            py::dict header;
            for (const auto& [k, v] : table.header)
                header[py::str(k)] = v;
            py::dict out;
            out["header"] = header;
            out["median_nmse"] = table.median_nmse;
            out["failed_trials"] = table.failed_trials;
            return out;
        },
        py::arg("algorithm") = "dals", py::arg("graph") = "paley:9", py::arg("node_rows") = std::vector<Index>{1},
        py::arg("J") = 4, py::arg("K") = 10, py::arg("rank") = 4, py::arg("iterations") = 100, py::arg("runs") = 100,
        py::arg("seed") = 0, py::arg("consensus") = "finite-time", py::arg("nc") = 1, py::arg("ns") = 1,
        py::arg("snr_obs_db") = py::none(), py::arg("snr_link_db") = py::none(), py::arg("damping") = 1e-3,
        py::arg("identical_init") = false,
        "Monte Carlo run; returns {'header': {...}, 'median_nmse': [...], 'failed_trials': n}.");
}
