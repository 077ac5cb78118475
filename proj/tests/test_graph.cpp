#include "dparafac/graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace dparafac;

namespace {

void expect_spectrum(const LaplacianSpectrum& s, std::vector<double> expected, double tol = 1e-10)
{
    std::sort(expected.begin(), expected.end());
    ASSERT_EQ(s.eigenvalues.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
        EXPECT_NEAR(s.eigenvalues[i], expected[i], tol) << "eigenvalue " << i;
}

} // namespace

TEST(Cycle, Triangle)
{
    const Graph g = cycle_graph(3);
    EXPECT_EQ(g.edges().size(), 3u);
    expect_spectrum(laplacian_spectrum(g), {0, 3, 3});
}

TEST(Cycle, NineNodesCirculantSpectrum)
{
    const Graph g = cycle_graph(9);
    for (Index l = 0; l < 9; ++l)
        EXPECT_EQ(g.degree(l), 2);
    EXPECT_EQ(g.diameter(), 4);
    std::vector<double> closed;
    for (int k = 0; k < 9; ++k)
        closed.push_back(2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / 9.0));
    const auto s = laplacian_spectrum(g);
    expect_spectrum(s, closed);
    EXPECT_EQ(s.distinct_nonzero.size(), 4u);
    EXPECT_EQ(finite_time_schedule(s).size(), 4u);
}

TEST(Cycle, TooSmallThrows)
{
    EXPECT_THROW(cycle_graph(2), GraphError);
}

TEST(Paley, FiveIsTheFiveCycle)
{
    const Graph p = paley_graph(5);
    const Graph c = cycle_graph(5);
    for (Index u = 0; u < 5; ++u)
        EXPECT_EQ(p.degree(u), 2);
    expect_spectrum(laplacian_spectrum(p), laplacian_spectrum(c).eigenvalues);
    // Residues mod 5 are {1, 4}: 0 joins 1 and 4.
    EXPECT_TRUE(p.has_edge(0, 1));
    EXPECT_TRUE(p.has_edge(0, 4));
    EXPECT_FALSE(p.has_edge(0, 2));
}

TEST(Paley, NineIsStronglyRegular)
{
    const Graph g = paley_graph(9);
    EXPECT_EQ(g.diameter(), 2);
    for (Index u = 0; u < 9; ++u) {
        EXPECT_EQ(g.degree(u), 4);
        for (Index v = u + 1; v < 9; ++v) {
            int common = 0;
            for (Index w = 0; w < 9; ++w)
                common += (w != u && w != v && g.has_edge(u, w) && g.has_edge(v, w)) ? 1 : 0;
            EXPECT_EQ(common, g.has_edge(u, v) ? 1 : 2) << u << "," << v;
        }
    }
    const auto s = laplacian_spectrum(g);
    expect_spectrum(s, {0, 3, 3, 3, 3, 6, 6, 6, 6});
    ASSERT_EQ(s.distinct_nonzero.size(), 2u);
    EXPECT_NEAR(s.distinct_nonzero[0], 3.0, 1e-12);
    EXPECT_NEAR(s.distinct_nonzero[1], 6.0, 1e-12);
}

TEST(Paley, ThirteenAndTwentyFive)
{
    const Graph g13 = paley_graph(13);
    for (Index u = 0; u < 13; ++u)
        EXPECT_EQ(g13.degree(u), 6);
    const Graph g25 = paley_graph(25);
    for (Index u = 0; u < 25; ++u)
        EXPECT_EQ(g25.degree(u), 12);
    // Paley graphs are self-complementary strongly regular graphs with two
    // distinct nonzero Laplacian eigenvalues.
    EXPECT_EQ(laplacian_spectrum(g13).distinct_nonzero.size(), 2u);
    EXPECT_EQ(laplacian_spectrum(g25).distinct_nonzero.size(), 2u);
}

TEST(Paley, UnsupportedOrders)
{
    EXPECT_THROW(paley_graph(7), GraphError);
    EXPECT_THROW(paley_graph(21), GraphError);
    EXPECT_THROW(paley_graph(1), GraphError);
}

TEST(EdgeList, TriangleDuplicatesAndComments)
{
    const Graph g = from_edge_list("0 1\n1 2\n2 0\n");
    EXPECT_EQ(g.node_count(), 3);
    EXPECT_EQ(g.edges().size(), 3u);

    const Graph d = from_edge_list("# header\n0 1\n1 0   # again\n\n0 1\n");
    EXPECT_EQ(d.edges().size(), 1u);
    EXPECT_EQ(d.node_count(), 2);
}

TEST(EdgeList, DisconnectedIsFlagged)
{
    const Graph g = from_edge_list("0 1\n2 3\n");
    EXPECT_FALSE(g.is_connected());
    EXPECT_EQ(g.component_count(), 2);
    EXPECT_EQ(g.diameter(), -1);
    EXPECT_THROW(constant_edge_weights(g), GraphError);
    EXPECT_THROW(finite_time_schedule(laplacian_spectrum(g)), GraphError);
    const auto s = laplacian_spectrum(g);
    EXPECT_NEAR(s.algebraic_connectivity(), 0.0, 1e-12);
}

TEST(EdgeList, Errors)
{
    EXPECT_THROW(from_edge_list("0 0\n"), GraphError);
    EXPECT_THROW(from_edge_list("0\n"), GraphError);
    EXPECT_THROW(from_edge_list("0 1 2\n"), GraphError);
    EXPECT_THROW(from_edge_list("a b\n"), GraphError);
    EXPECT_THROW(from_edge_list("0 -1\n"), GraphError);
    EXPECT_THROW(from_edge_list(""), GraphError);
    EXPECT_THROW(from_edge_list("0 5\n", 3), GraphError);
    EXPECT_THROW(read_edge_list_file("/nonexistent/graph.txt"), GraphError);
}

TEST(Spectrum, CompleteGraph)
{
    const auto s = laplacian_spectrum(complete_graph(4));
    expect_spectrum(s, {0, 4, 4, 4});
    const auto sched = finite_time_schedule(s);
    ASSERT_EQ(sched.size(), 1u);
    EXPECT_NEAR(sched[0], 4.0, 1e-12);
    EXPECT_EQ(complete_graph(5).diameter(), 1);
}

TEST(Spectrum, PathOfTwo)
{
    const Graph g = path_graph(2);
    EXPECT_TRUE(g.is_connected());
    EXPECT_EQ(g.diameter(), 1);
}

TEST(Weights, OptimalGamma)
{
    EXPECT_NEAR(constant_edge_weights(paley_graph(9)).gamma, 2.0 / 9.0, 1e-12);
    const double l2 = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / 9.0);
    const double lmax = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * 4.0 / 9.0);
    const double gamma = constant_edge_weights(cycle_graph(9)).gamma;
    EXPECT_NEAR(gamma, 2.0 / (l2 + lmax), 1e-12);
    EXPECT_NEAR(gamma, 0.46006, 1e-5);
}

TEST(Weights, SingleNodeRejected)
{
    EXPECT_THROW(constant_edge_weights(Graph(1, {})), GraphError);
    EXPECT_TRUE(finite_time_schedule(laplacian_spectrum(Graph(1, {}))).empty());
}

TEST(Graph, ConstructorChecks)
{
    EXPECT_THROW(Graph(0, {}), GraphError);
    EXPECT_THROW(Graph(2, {{0, 2}}), GraphError);
    EXPECT_THROW(Graph(2, {{1, 1}}), GraphError);
    const Graph g(3, {{1, 0}, {0, 1}, {2, 1}});
    EXPECT_EQ(g.edges().size(), 2u);
    EXPECT_EQ(g.edges().front(), (std::pair<Index, Index>{0, 1}));
}
