#include "cyclicff/graph.hpp"

#include "cyclicff/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

namespace cyclicff {

namespace {

using UndirectedEdges = std::vector<std::pair<std::size_t, std::size_t>>;

UndirectedEdges collect_edges(const std::vector<std::set<std::size_t>>& adj) {
    UndirectedEdges edges;
    for (std::size_t u = 0; u < adj.size(); ++u)
        for (std::size_t v : adj[u])
            if (u < v)
                edges.emplace_back(u, v);
    return edges;
}

std::vector<Synapse> both_directions(const UndirectedEdges& edges) {
    std::vector<Synapse> out;
    out.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        out.push_back({u, v});
        out.push_back({v, u});
    }
    return out;
}

} // namespace

Topology::Topology(std::size_t n_neurons, std::vector<Synapse> synapses)
    : n_(n_neurons), synapses_(std::move(synapses)) {
    for (const Synapse& s : synapses_) {
        if (s.src >= n_ || s.dst >= n_)
            throw ParameterError("Topology: synapse " + std::to_string(s.src) + "->" +
                                 std::to_string(s.dst) + " out of range for " +
                                 std::to_string(n_) + " neurons");
        if (s.src == s.dst)
            throw ParameterError("Topology: self-loop on neuron " + std::to_string(s.src));
    }
    std::sort(synapses_.begin(), synapses_.end(), [](const Synapse& a, const Synapse& b) {
        return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
    });
    if (std::adjacent_find(synapses_.begin(), synapses_.end()) != synapses_.end())
        throw ParameterError("Topology: duplicate synapse");

    first_in_.assign(n_ + 1, 0);
    for (const Synapse& s : synapses_)
        ++first_in_[s.dst + 1];
    for (std::size_t j = 0; j < n_; ++j)
        first_in_[j + 1] += first_in_[j];
}

std::vector<std::size_t> Topology::predecessors(std::size_t j) const {
    if (j >= n_)
        throw ParameterError("predecessors: neuron " + std::to_string(j) + " out of range");
    std::vector<std::size_t> out;
    out.reserve(first_in_[j + 1] - first_in_[j]);
    for (std::size_t e = first_in_[j]; e < first_in_[j + 1]; ++e)
        out.push_back(synapses_[e].src);
    return out;
}

std::vector<std::size_t> Topology::successors(std::size_t i) const {
    if (i >= n_)
        throw ParameterError("successors: neuron " + std::to_string(i) + " out of range");
    std::vector<std::size_t> out;
    for (const Synapse& s : synapses_)
        if (s.src == i)
            out.push_back(s.dst);
    return out;
}

std::size_t Topology::in_degree(std::size_t j) const {
    if (j >= n_)
        throw ParameterError("in_degree: neuron out of range");
    return first_in_[j + 1] - first_in_[j];
}

std::size_t Topology::out_degree(std::size_t i) const {
    return successors(i).size();
}

bool Topology::contains(std::size_t src, std::size_t dst) const {
    if (dst >= n_)
        return false;
    auto begin = synapses_.begin() + static_cast<std::ptrdiff_t>(first_in_[dst]);
    auto end = synapses_.begin() + static_cast<std::ptrdiff_t>(first_in_[dst + 1]);
    return std::binary_search(begin, end, Synapse{src, dst},
                              [](const Synapse& a, const Synapse& b) { return a.src < b.src; });
}

bool has_cycle(const Topology& t) {
    enum class Mark : unsigned char { fresh, open, done };
    const std::size_t n = t.n_neurons();
    std::vector<std::vector<std::size_t>> out(n);
    for (const Synapse& s : t.synapses())
        out[s.src].push_back(s.dst);

    std::vector<Mark> mark(n, Mark::fresh);
    for (std::size_t root = 0; root < n; ++root) {
        if (mark[root] != Mark::fresh)
            continue;
        // (node, next child position)
        std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
        mark[root] = Mark::open;
        while (!stack.empty()) {
            auto& [node, pos] = stack.back();
            if (pos == out[node].size()) {
                mark[node] = Mark::done;
                stack.pop_back();
                continue;
            }
            const std::size_t next = out[node][pos++];
            if (mark[next] == Mark::open)
                return true;
            if (mark[next] == Mark::fresh) {
                mark[next] = Mark::open;
                stack.emplace_back(next, 0);
            }
        }
    }
    return false;
}

std::string to_edge_list(const Topology& t) {
    std::ostringstream os;
    os << "n " << t.n_neurons() << '\n';
    for (const Synapse& s : t.synapses())
        os << s.src << ' ' << s.dst << '\n';
    return os.str();
}

Topology parse_edge_list(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string tag;
    std::size_t n = 0;
    if (!(in >> tag >> n) || tag != "n")
        throw FormatError("edge list: expected header 'n <count>'");
    std::vector<Synapse> synapses;
    std::size_t src = 0, dst = 0;
    while (in >> src >> dst)
        synapses.push_back({src, dst});
    if (!in.eof())
        throw FormatError("edge list: malformed synapse line");
    return Topology(n, std::move(synapses));
}

std::string_view to_string(GraphKind kind) {
    switch (kind) {
    case GraphKind::chain: return "chain";
    case GraphKind::cycle: return "cycle";
    case GraphKind::complete: return "complete";
    case GraphKind::ws: return "ws";
    case GraphKind::ba: return "ba";
    }
    return "?";
}

GraphKind parse_graph_kind(std::string_view name) {
    for (GraphKind k : {GraphKind::chain, GraphKind::cycle, GraphKind::complete, GraphKind::ws,
                        GraphKind::ba})
        if (to_string(k) == name)
            return k;
    throw ParameterError("unknown graph kind '" + std::string(name) +
                         "' (expected chain, cycle, complete, ws or ba)");
}

void GeneratorSpec::validate() const {
    if (n < 1)
        throw ParameterError("graph: n must be at least 1");
    if (kind == GraphKind::ws) {
        if (ws_k % 2 != 0 || ws_k >= n)
            throw ParameterError("graph: ws_k must be even and smaller than n");
        if (!(ws_p >= 0.0 && ws_p <= 1.0))
            throw ParameterError("graph: ws_p must lie in [0, 1]");
    }
    if (kind == GraphKind::ba && (ba_m < 1 || ba_m >= n))
        throw ParameterError("graph: ba_m must satisfy 1 <= ba_m < n");
}

std::vector<std::pair<std::size_t, std::size_t>> watts_strogatz_edges(
    std::size_t n, std::size_t k, double p, std::uint64_t seed) {
    GeneratorSpec{GraphKind::ws, n, k, p, 2, seed}.validate();
    Rng rng(seed, Stream::graph);
    std::vector<std::set<std::size_t>> adj(n);
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t j = 1; j <= k / 2; ++j) {
            const std::size_t v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    // Rewire each lattice edge (u, u+j) with probability p, keeping u fixed.
    for (std::size_t j = 1; j <= k / 2; ++j) {
        for (std::size_t u = 0; u < n; ++u) {
            const std::size_t v = (u + j) % n;
            if (rng.uniform() >= p)
                continue;
            if (adj[u].size() >= n - 1)
                continue;
            std::size_t w = static_cast<std::size_t>(rng.uniform_index(n));
            while (w == u || adj[u].contains(w))
                w = static_cast<std::size_t>(rng.uniform_index(n));
            if (!adj[u].contains(v))
                continue;  // already rewired away from the other endpoint
            adj[u].erase(v);
            adj[v].erase(u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    return collect_edges(adj);
}

std::vector<std::pair<std::size_t, std::size_t>> barabasi_albert_edges(
    std::size_t n, std::size_t m, std::uint64_t seed) {
    GeneratorSpec{GraphKind::ba, n, 2, 0.3, m, seed}.validate();
    Rng rng(seed, Stream::graph);
    std::vector<std::set<std::size_t>> adj(n);
    // Seed graph: complete graph on the first m nodes.
    std::vector<std::size_t> repeated;  // node listed once per unit of degree
    for (std::size_t u = 0; u < m; ++u)
        for (std::size_t v = u + 1; v < m; ++v) {
            adj[u].insert(v);
            adj[v].insert(u);
            repeated.push_back(u);
            repeated.push_back(v);
        }
    for (std::size_t source = m; source < n; ++source) {
        std::set<std::size_t> targets;
        while (targets.size() < m) {
            if (repeated.empty())
                targets.insert(static_cast<std::size_t>(rng.uniform_index(source)));
            else
                targets.insert(repeated[static_cast<std::size_t>(rng.uniform_index(repeated.size()))]);
        }
        for (std::size_t t : targets) {
            adj[source].insert(t);
            adj[t].insert(source);
            repeated.push_back(source);
            repeated.push_back(t);
        }
    }
    return collect_edges(adj);
}

Topology generate(const GeneratorSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n;
    std::vector<Synapse> synapses;
    switch (spec.kind) {
    case GraphKind::chain:
        for (std::size_t i = 0; i + 1 < n; ++i)
            synapses.push_back({i, i + 1});
        break;
    case GraphKind::cycle:
        for (std::size_t i = 0; i + 1 < n; ++i)
            synapses.push_back({i, i + 1});
        if (n >= 2)
            synapses.push_back({n - 1, 0});
        break;
    case GraphKind::complete:
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j)
                    synapses.push_back({i, j});
        break;
    case GraphKind::ws:
        synapses = both_directions(watts_strogatz_edges(n, spec.ws_k, spec.ws_p, spec.seed));
        break;
    case GraphKind::ba:
        synapses = both_directions(barabasi_albert_edges(n, spec.ba_m, spec.seed));
        break;
    }
    return Topology(n, std::move(synapses));
}

} // namespace cyclicff
