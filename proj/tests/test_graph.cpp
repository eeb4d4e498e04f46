#include "cyclicff/errors.hpp"
#include "cyclicff/graph.hpp"
#include "cyclicff/numerics.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace cyclicff;

namespace {

using EdgeSet = std::set<std::pair<std::size_t, std::size_t>>;

EdgeSet edges(const Topology& t) {
    EdgeSet out;
    for (const Synapse& s : t.synapses())
        out.emplace(s.src, s.dst);
    return out;
}

Topology gen(GraphKind kind, std::size_t n, std::uint64_t seed = 0) {
    GeneratorSpec s;
    s.kind = kind;
    s.n = n;
    s.seed = seed;
    return generate(s);
}

} // namespace

TEST_CASE("chain, cycle and complete edge sets for n = 4") {
    CHECK(edges(gen(GraphKind::chain, 4)) == EdgeSet{{0, 1}, {1, 2}, {2, 3}});
    CHECK(edges(gen(GraphKind::cycle, 4)) == EdgeSet{{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    const Topology k4 = gen(GraphKind::complete, 4);
    CHECK(k4.n_synapses() == 12);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(k4.contains(i, j) == (i != j));
}

TEST_CASE("predecessor examples") {
    CHECK(gen(GraphKind::complete, 4).predecessors(2) == std::vector<std::size_t>{0, 1, 3});
    CHECK(gen(GraphKind::chain, 4).predecessors(0).empty());
    CHECK(gen(GraphKind::cycle, 4).predecessors(0) == std::vector<std::size_t>{3});
    CHECK_THROWS_AS(gen(GraphKind::chain, 4).predecessors(4), ParameterError);
}

TEST_CASE("topology rejects invalid synapse sets") {
    CHECK_THROWS_AS(Topology(3, {{0, 0}}), ParameterError);
    CHECK_THROWS_AS(Topology(3, {{0, 1}, {0, 1}}), ParameterError);
    CHECK_THROWS_AS(Topology(3, {{0, 3}}), ParameterError);
    const Topology t(3, {{2, 1}, {0, 1}, {1, 0}});
    // canonical (dst, src) order
    REQUIRE(t.n_synapses() == 3);
    CHECK(t.synapses()[0] == Synapse{1, 0});
    CHECK(t.synapses()[1] == Synapse{0, 1});
    CHECK(t.synapses()[2] == Synapse{2, 1});
}

TEST_CASE("watts-strogatz with p = 0 is the ring lattice") {
    GeneratorSpec s{GraphKind::ws, 8, 2, 0.0, 2, 1};
    const Topology t = generate(s);
    CHECK(t.n_synapses() == 16);
    for (std::size_t j = 0; j < 8; ++j) {
        CHECK(t.in_degree(j) == 2);
        CHECK(t.out_degree(j) == 2);
        CHECK(t.contains(j, (j + 1) % 8));
        CHECK(t.contains((j + 1) % 8, j));
    }
    // wider lattice: every node joined to its k/2 nearest neighbours each side
    s.n = 10;
    s.ws_k = 4;
    const Topology w = generate(s);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) {
            const std::size_t ring = std::min((i + 10 - j) % 10, (j + 10 - i) % 10);
            CHECK(w.contains(i, j) == (ring == 1 || ring == 2));
        }
}

TEST_CASE("watts-strogatz rewiring keeps the edge count and stays simple") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto e = watts_strogatz_edges(12, 4, 0.5, seed);
        CHECK(e.size() == 12 * 4 / 2);
        std::set<std::pair<std::size_t, std::size_t>> uniq(e.begin(), e.end());
        CHECK(uniq.size() == e.size());
        for (auto [a, b] : e) {
            CHECK(a < b);
            CHECK(b < 12);
        }
    }
}

TEST_CASE("barabasi-albert edge counts match a brute-force recount") {
    // Seed graph: complete graph on m nodes (m(m-1)/2 edges); each of the
    // remaining n - m nodes attaches with exactly m distinct edges.
    for (std::size_t n = 2; n <= 20; ++n)
        for (std::size_t m = 1; m < n; ++m)
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const auto e = barabasi_albert_edges(n, m, seed);
                std::set<std::pair<std::size_t, std::size_t>> uniq;
                std::map<std::size_t, std::size_t> later_degree;  // edges to earlier nodes
                for (auto [a, b] : e) {
                    REQUIRE(a < b);
                    REQUIRE(b < n);
                    uniq.emplace(a, b);
                    if (b >= m)
                        ++later_degree[b];
                }
                CHECK(uniq.size() == e.size());
                std::size_t seed_edges = 0;
                for (auto [a, b] : uniq)
                    seed_edges += b < m;
                CHECK(seed_edges == m * (m - 1) / 2);
                for (std::size_t v = m; v < n; ++v)
                    CHECK(later_degree[v] == m);
                CHECK(e.size() == m * (m - 1) / 2 + (n - m) * m);

                GeneratorSpec s{GraphKind::ba, n, 2, 0.3, m, seed};
                CHECK(generate(s).n_synapses() == 2 * e.size());
            }
}

TEST_CASE("generator spec validation") {
    CHECK_THROWS_AS(generate(GeneratorSpec{GraphKind::chain, 0}), ParameterError);
    CHECK_THROWS_AS(generate(GeneratorSpec{GraphKind::ws, 8, 3, 0.1}), ParameterError);
    CHECK_THROWS_AS(generate(GeneratorSpec{GraphKind::ws, 4, 4, 0.1}), ParameterError);
    CHECK_THROWS_AS(generate(GeneratorSpec{GraphKind::ws, 8, 2, 1.5}), ParameterError);
    CHECK_THROWS_AS(generate(GeneratorSpec{GraphKind::ba, 4, 2, 0.3, 0}), ParameterError);
    CHECK_THROWS_AS(generate(GeneratorSpec{GraphKind::ba, 4, 2, 0.3, 4}), ParameterError);
    CHECK(generate(GeneratorSpec{GraphKind::chain, 1}).n_synapses() == 0);
    CHECK_THROWS_AS(parse_graph_kind("tree"), ParameterError);
    for (auto k : {GraphKind::chain, GraphKind::cycle, GraphKind::complete, GraphKind::ws, GraphKind::ba})
        CHECK(parse_graph_kind(to_string(k)) == k);
}

TEST_CASE("generation is deterministic and round-trips through the edge list") {
    for (auto kind : {GraphKind::chain, GraphKind::cycle, GraphKind::complete, GraphKind::ws, GraphKind::ba})
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            GeneratorSpec s{kind, 9, 4, 0.4, 3, seed};
            const Topology a = generate(s), b = generate(s);
            CHECK(a == b);
            CHECK(to_edge_list(a) == to_edge_list(b));
            CHECK(parse_edge_list(to_edge_list(a)) == a);
        }
    CHECK_THROWS_AS(parse_edge_list("n 3\n0 5\n"), ParameterError);
    CHECK_THROWS_AS(parse_edge_list("0 1\n"), FormatError);
}

TEST_CASE("predecessors enumerate every synapse exactly once") {
    Rng rng(4, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const auto kind = static_cast<GraphKind>(rng.uniform_index(5));
        GeneratorSpec s{kind, 3 + rng.uniform_index(10), 2, rng.uniform(), 1 + rng.uniform_index(2), rng.next_u64()};
        const Topology t = generate(s);
        std::multiset<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t j = 0; j < t.n_neurons(); ++j) {
            const auto p = t.predecessors(j);
            CHECK(std::is_sorted(p.begin(), p.end()));
            CHECK(p.size() == t.in_degree(j));
            for (std::size_t i : p)
                seen.emplace(i, j);
        }
        const EdgeSet all = edges(t);
        CHECK(seen.size() == all.size());
        CHECK(EdgeSet(seen.begin(), seen.end()) == all);
    }
}

TEST_CASE("cyclicity") {
    for (std::size_t n = 1; n <= 8; ++n)
        CHECK_FALSE(has_cycle(gen(GraphKind::chain, n)));
    for (std::size_t n = 2; n <= 8; ++n) {
        CHECK(has_cycle(gen(GraphKind::cycle, n)));
        CHECK(has_cycle(gen(GraphKind::complete, n)));
    }
    CHECK_FALSE(has_cycle(Topology(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}})));
    CHECK(has_cycle(Topology(4, {{0, 1}, {1, 2}, {2, 3}, {3, 1}})));
}
