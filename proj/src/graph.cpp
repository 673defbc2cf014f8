#include "conet/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "conet/error.hpp"
#include "conet/rng.hpp"

namespace conet {

namespace {

constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

bool is_connected(std::size_t n, const std::vector<std::vector<NodeId>>& adj) {
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::vector<NodeId> frontier{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const NodeId u = frontier.back();
        frontier.pop_back();
        for (NodeId v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                frontier.push_back(v);
            }
        }
    }
    return reached == n;
}

bool contains(const std::vector<NodeId>& row, NodeId v) {
    return std::find(row.begin(), row.end(), v) != row.end();
}

// Any remaining stub pair that could still be joined?
bool has_suitable_pair(const std::vector<NodeId>& open, const std::vector<std::vector<NodeId>>& adj) {
    std::vector<NodeId> distinct(open);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t i = 0; i < distinct.size(); ++i)
        for (std::size_t j = i + 1; j < distinct.size(); ++j)
            if (!contains(adj[distinct[i]], distinct[j])) return true;
    return false;
}

// One pairing attempt. Returns false on a dead end.
bool try_pairing(std::size_t n, std::size_t k, RngStream& rng, std::vector<std::vector<NodeId>>& adj) {
    adj.assign(n, {});
    for (auto& row : adj) row.reserve(k);
    std::vector<NodeId> open;
    open.reserve(n * k);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t s = 0; s < k; ++s) open.push_back(static_cast<NodeId>(v));

    std::size_t misses = 0;
    while (!open.empty()) {
        const std::size_t size = open.size();
        const auto i = static_cast<std::size_t>(rng.below(size));
        auto j = static_cast<std::size_t>(rng.below(size - 1));
        if (j >= i) ++j;
        const NodeId u = open[i];
        const NodeId v = open[j];
        if (u != v && !contains(adj[u], v)) {
            adj[u].push_back(v);
            adj[v].push_back(u);
            const std::size_t hi = std::max(i, j);
            const std::size_t lo = std::min(i, j);
            open[hi] = open.back();
            open.pop_back();
            open[lo] = open.back();
            open.pop_back();
            misses = 0;
            continue;
        }
        if (++misses > 2 * size + 16) {
            if (!has_suitable_pair(open, adj)) return false;
            misses = 0;
        }
    }
    return true;
}

std::uint32_t bounded_distance(const ConceptGraph& graph, NodeId source, NodeId target,
                               std::uint32_t max_depth, std::vector<std::uint32_t>& dist,
                               std::vector<NodeId>& queue) {
    if (source == target) return 0;
    std::fill(dist.begin(), dist.end(), kUnreached);
    queue.clear();
    queue.push_back(source);
    dist[source] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const NodeId u = queue[head];
        if (dist[u] >= max_depth) break;
        for (NodeId v : graph.neighbors(u)) {
            if (dist[v] != kUnreached) continue;
            dist[v] = dist[u] + 1;
            if (v == target) return dist[v];
            queue.push_back(v);
        }
    }
    return kUnreached;
}

}  // namespace

ConceptGraph ConceptGraph::from_adjacency(std::size_t n_nodes, std::size_t degree,
                                          std::vector<std::vector<NodeId>> adjacency,
                                          std::uint64_t seed) {
    if (adjacency.size() != n_nodes)
        throw Error(ErrorCode::InvalidArgument, "adjacency has wrong number of rows");
    std::vector<NodeId> flat;
    flat.reserve(n_nodes * degree);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        auto& row = adjacency[i];
        if (row.size() != degree)
            throw Error(ErrorCode::InvalidArgument, "node " + std::to_string(i) + " has degree " +
                                                        std::to_string(row.size()));
        std::sort(row.begin(), row.end());
        for (std::size_t s = 0; s < row.size(); ++s) {
            const NodeId v = row[s];
            if (v >= n_nodes) throw Error(ErrorCode::InvalidArgument, "neighbor id out of range");
            if (v == i) throw Error(ErrorCode::InvalidArgument, "self-loop at node " + std::to_string(i));
            if (s > 0 && row[s - 1] == v)
                throw Error(ErrorCode::InvalidArgument, "duplicate edge at node " + std::to_string(i));
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    for (std::size_t i = 0; i < n_nodes; ++i)
        for (NodeId v : adjacency[i])
            if (!std::binary_search(adjacency[v].begin(), adjacency[v].end(), static_cast<NodeId>(i)))
                throw Error(ErrorCode::InvalidArgument, "adjacency is not symmetric");
    if (!is_connected(n_nodes, adjacency)) throw Error(ErrorCode::InvalidArgument, "graph is not connected");
    return ConceptGraph(n_nodes, degree, seed, std::move(flat));
}

std::uint64_t ConceptGraph::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t word) {
        for (int b = 0; b < 8; ++b) {
            h ^= (word >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    };
    mix(n_nodes_);
    mix(degree_);
    for (NodeId v : adjacency_) mix(v);
    return h;
}

ConceptGraph generate_regular_graph(std::size_t n, std::size_t k, std::uint64_t seed) {
    if ((n * k) % 2 != 0)
        throw Error(ErrorCode::OddDegreeSum,
                    "n*k = " + std::to_string(n) + "*" + std::to_string(k) + " is odd");
    if (k >= n)
        throw Error(ErrorCode::InfeasibleDegree,
                    "degree " + std::to_string(k) + " needs more than " + std::to_string(n) + " nodes");
    if (k < 2) throw Error(ErrorCode::InfeasibleDegree, "degree must be at least 2");
    if (n > std::numeric_limits<NodeId>::max())
        throw Error(ErrorCode::InfeasibleDegree, "too many nodes");

    std::vector<std::vector<NodeId>> adj;
    for (int attempt = 0; attempt < kMaxGenerationRestarts; ++attempt) {
        RngStream rng(seed, StreamTag::GraphGeneration, static_cast<std::uint32_t>(attempt));
        if (!try_pairing(n, k, rng, adj)) continue;
        if (!is_connected(n, adj)) continue;
        return ConceptGraph::from_adjacency(n, k, std::move(adj), seed);
    }
    throw Error(ErrorCode::GenerationFailure, "no simple connected graph after " +
                                                  std::to_string(kMaxGenerationRestarts) + " restarts");
}

std::vector<std::uint32_t> bfs_distances(const ConceptGraph& graph, NodeId source) {
    std::vector<std::uint32_t> dist(graph.n_nodes(), kUnreached);
    std::vector<NodeId> queue{source};
    dist[source] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const NodeId u = queue[head];
        for (NodeId v : graph.neighbors(u)) {
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

TaskInstance select_task(const ConceptGraph& graph, std::uint64_t seed, std::uint32_t d_min,
                         std::uint32_t d_max) {
    const std::size_t n = graph.n_nodes();
    if (d_min < 1 || d_min > d_max || d_max >= n)
        throw Error(ErrorCode::InvalidArgument, "distance window must satisfy 1 <= d_min <= d_max < n");

    RngStream rng(seed, StreamTag::TaskSelection, 0);
    std::vector<std::uint32_t> dist(n);
    std::vector<NodeId> queue;
    queue.reserve(n);
    const std::size_t max_rejections = 10 * n;
    for (std::size_t rejected = 0; rejected < max_rejections; ++rejected) {
        const auto q = static_cast<NodeId>(rng.below(n));
        const auto a = static_cast<NodeId>(rng.below(n));
        if (q == a) continue;
        const std::uint32_t d = bounded_distance(graph, q, a, d_max, dist, queue);
        if (d >= d_min && d <= d_max) return {q, a, d};
    }

    // Exhaustive fallback: count feasible ordered pairs, then pick one uniformly.
    auto in_window = [&](std::uint32_t d) { return d >= d_min && d <= d_max; };
    std::uint64_t total = 0;
    for (NodeId q = 0; q < n; ++q) {
        const auto d = bfs_distances(graph, q);
        total += static_cast<std::uint64_t>(std::count_if(d.begin(), d.end(), in_window));
    }
    if (total == 0)
        throw Error(ErrorCode::NoFeasiblePair, "no pair at distance in [" + std::to_string(d_min) + ", " +
                                                   std::to_string(d_max) + "]");
    std::uint64_t pick = rng.below(total);
    for (NodeId q = 0; q < n; ++q) {
        const auto d = bfs_distances(graph, q);
        for (NodeId a = 0; a < n; ++a) {
            if (!in_window(d[a])) continue;
            if (pick-- == 0) return {q, a, d[a]};
        }
    }
    throw Error(ErrorCode::NoFeasiblePair, "exhaustive scan inconsistent");
}

void write_graph(std::ostream& out, const ConceptGraph& graph) {
    out << "conet-graph v1 " << graph.n_nodes() << ' ' << graph.degree() << ' ' << graph.seed() << '\n';
    for (NodeId i = 0; i < graph.n_nodes(); ++i) {
        out << i << ':';
        for (NodeId v : graph.neighbors(i)) out << ' ' << v;
        out << '\n';
    }
}

ConceptGraph read_graph(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty graph file");
    std::istringstream header(line);
    std::string magic, version;
    std::size_t n = 0, k = 0;
    std::uint64_t seed = 0;
    if (!(header >> magic >> version >> n >> k >> seed) || magic != "conet-graph" || version != "v1")
        throw Error(ErrorCode::ParseError, "bad graph header: " + line);

    std::vector<std::vector<NodeId>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "truncated graph file");
        std::istringstream row(line);
        std::size_t id = 0;
        char colon = 0;
        if (!(row >> id >> colon) || colon != ':' || id != i)
            throw Error(ErrorCode::ParseError, "bad adjacency line: " + line);
        NodeId v = 0;
        while (row >> v) adj[i].push_back(v);
        if (!row.eof()) throw Error(ErrorCode::ParseError, "bad neighbor id on line: " + line);
        if (!std::is_sorted(adj[i].begin(), adj[i].end()))
            throw Error(ErrorCode::ParseError, "neighbor ids not ascending on line: " + line);
    }
    try {
        return ConceptGraph::from_adjacency(n, k, std::move(adj), seed);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
}

void save_graph(const std::filesystem::path& path, const ConceptGraph& graph) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    write_graph(out, graph);
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

ConceptGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    return read_graph(in);
}

}  // namespace conet
