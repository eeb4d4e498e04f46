#pragma once

#include "cyclicff/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cyclicff {

struct Synapse {
    std::size_t src = 0;
    std::size_t dst = 0;

    friend bool operator==(const Synapse&, const Synapse&) = default;
};

/// Directed synapse graph over computational neurons.
///
/// Synapses are kept sorted by (dst, src), so the predecessors of a neuron
/// are a contiguous, ascending run. Self-loops and duplicate edges are
/// rejected at construction.
class Topology {
public:
    Topology() = default;
    Topology(std::size_t n_neurons, std::vector<Synapse> synapses);

    std::size_t n_neurons() const { return n_; }
    const std::vector<Synapse>& synapses() const { return synapses_; }
    std::size_t n_synapses() const { return synapses_.size(); }

    /// Ascending sources of every synapse i -> j.
    std::vector<std::size_t> predecessors(std::size_t j) const;
    std::vector<std::size_t> successors(std::size_t i) const;

    std::size_t in_degree(std::size_t j) const;
    std::size_t out_degree(std::size_t i) const;

    bool contains(std::size_t src, std::size_t dst) const;

    friend bool operator==(const Topology&, const Topology&) = default;

private:
    std::size_t n_ = 0;
    std::vector<Synapse> synapses_;
    std::vector<std::size_t> first_in_;  // first_in_[j] .. first_in_[j+1] indexes synapses_
};

/// True when the digraph has a directed cycle (iterative DFS colouring).
bool has_cycle(const Topology& t);

// Edge-list text: "n <count>" then one "src dst" line per synapse.
std::string to_edge_list(const Topology& t);
Topology parse_edge_list(std::string_view text);

enum class GraphKind { chain, cycle, complete, ws, ba };

std::string_view to_string(GraphKind kind);
GraphKind parse_graph_kind(std::string_view name);

struct GeneratorSpec {
    GraphKind kind = GraphKind::complete;
    std::size_t n = 4;
    std::size_t ws_k = 2;
    double ws_p = 0.3;
    std::size_t ba_m = 2;
    std::uint64_t seed = 0;

    /// Throws ParameterError when a field is out of range for the kind.
    void validate() const;
};

/// Builds the topology. WS and BA are generated undirected and each edge
/// {i, j} becomes the two synapses i -> j and j -> i.
Topology generate(const GeneratorSpec& spec);

/// Undirected edges (i < j) of the Watts-Strogatz and Barabasi-Albert
/// generators, exposed for degree/edge-count checks.
std::vector<std::pair<std::size_t, std::size_t>> watts_strogatz_edges(
    std::size_t n, std::size_t k, double p, std::uint64_t seed);
std::vector<std::pair<std::size_t, std::size_t>> barabasi_albert_edges(
    std::size_t n, std::size_t m, std::uint64_t seed);

} // namespace cyclicff
