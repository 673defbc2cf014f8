#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace conet {

using NodeId = std::uint32_t;

/// Simple, connected, undirected K-regular graph. Neighbor lists are stored
/// flat (node-major) and sorted ascending, so the directed edge (i -> j) has a
/// stable index `i * degree + slot`.
class ConceptGraph {
public:
    /// Validates every invariant (regularity, simplicity, symmetry,
    /// connectivity) and throws Error(InvalidArgument) on violation.
    static ConceptGraph from_adjacency(std::size_t n_nodes, std::size_t degree,
                                       std::vector<std::vector<NodeId>> adjacency,
                                       std::uint64_t seed);

    std::size_t n_nodes() const { return n_nodes_; }
    std::size_t degree() const { return degree_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t n_edges() const { return n_nodes_ * degree_ / 2; }
    std::size_t n_directed_edges() const { return adjacency_.size(); }

    std::span<const NodeId> neighbors(NodeId node) const {
        return {adjacency_.data() + node * degree_, degree_};
    }

    /// Position of `to` in neighbors(from), or -1 if not adjacent.
    int slot_of(NodeId from, NodeId to) const {
        const auto row = neighbors(from);
        for (std::size_t s = 0; s < row.size(); ++s)
            if (row[s] == to) return static_cast<int>(s);
        return -1;
    }

    bool adjacent(NodeId from, NodeId to) const { return slot_of(from, to) >= 0; }

    /// 64-bit FNV-1a digest of (n, k, adjacency); identifies the graph in checkpoints.
    std::uint64_t fingerprint() const;

    const std::vector<NodeId>& flat_adjacency() const { return adjacency_; }

    friend bool operator==(const ConceptGraph&, const ConceptGraph&) = default;

private:
    ConceptGraph(std::size_t n, std::size_t k, std::uint64_t seed, std::vector<NodeId> flat)
        : n_nodes_(n), degree_(k), seed_(seed), adjacency_(std::move(flat)) {}

    std::size_t n_nodes_ = 0;
    std::size_t degree_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<NodeId> adjacency_;
};

struct TaskInstance {
    NodeId q = 0;
    NodeId a = 0;
    std::uint32_t distance = 0;

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

inline constexpr int kMaxGenerationRestarts = 1000;

/// Random simple connected k-regular graph on n nodes, deterministic in
/// (n, k, seed). Stubs are paired one at a time, redrawing any pair that would
/// form a self-loop or a repeated edge; a dead end or a disconnected result
/// triggers a full restart, up to kMaxGenerationRestarts.
ConceptGraph generate_regular_graph(std::size_t n, std::size_t k, std::uint64_t seed);

/// BFS distances from `source`; unreachable nodes get UINT32_MAX.
std::vector<std::uint32_t> bfs_distances(const ConceptGraph& graph, NodeId source);

/// Uniform ordered pair (q, a) with BFS distance in [d_min, d_max].
TaskInstance select_task(const ConceptGraph& graph, std::uint64_t seed, std::uint32_t d_min,
                         std::uint32_t d_max);

void write_graph(std::ostream& out, const ConceptGraph& graph);
ConceptGraph read_graph(std::istream& in);
void save_graph(const std::filesystem::path& path, const ConceptGraph& graph);
ConceptGraph load_graph(const std::filesystem::path& path);

}  // namespace conet
