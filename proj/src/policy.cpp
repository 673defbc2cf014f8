#include "conet/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "conet/error.hpp"
#include "conet/rng.hpp"

namespace conet {

void UpdateConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); };
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
    if (!(theta_min > 0.0 && theta_min < theta_max && theta_max < 1.0))
        fail("theta bounds must satisfy 0 < theta_min < theta_max < 1");
    if (theta_init.kind == ThetaInit::Kind::Constant) {
        if (!(theta_init.lo > 0.0 && theta_init.lo < 1.0)) fail("constant theta_init must lie in (0, 1)");
    } else if (!(theta_init.lo > 0.0 && theta_init.lo <= theta_init.hi && theta_init.hi < 1.0)) {
        fail("uniform theta_init needs 0 < lo <= hi < 1");
    }
}

Policy::Policy(std::shared_ptr<const ConceptGraph> graph, std::vector<double> theta)
    : graph_(std::move(graph)), theta_(std::move(theta)) {
    if (!graph_) throw Error(ErrorCode::InvalidArgument, "policy needs a graph");
    if (theta_.size() != graph_->n_directed_edges())
        throw Error(ErrorCode::InvalidArgument, "theta size does not match graph");
}

double Policy::theta(NodeId from, NodeId to) const {
    const int slot = graph_->slot_of(from, to);
    if (slot < 0) throw Error(ErrorCode::NotAWalk, "no edge " + std::to_string(from) + "->" + std::to_string(to));
    return row(from)[static_cast<std::size_t>(slot)];
}

Policy init_policy(std::shared_ptr<const ConceptGraph> graph, const UpdateConfig& config, std::uint64_t seed) {
    config.validate();
    std::vector<double> theta(graph->n_directed_edges());
    const auto& init = config.theta_init;
    if (init.kind == ThetaInit::Kind::Constant) {
        std::fill(theta.begin(), theta.end(), init.lo);
    } else {
        RngStream rng(seed, StreamTag::PolicyInit, 0);
        for (double& t : theta) t = init.lo + (init.hi - init.lo) * rng.uniform();
    }
    for (double& t : theta) t = std::clamp(t, config.theta_min, config.theta_max);
    return Policy(std::move(graph), std::move(theta));
}

std::vector<double> transition_probs(const Policy& policy, NodeId node) {
    const auto row = policy.row(node);
    const double sum = policy.row_sum(node);
    std::vector<double> probs(row.size());
    for (std::size_t s = 0; s < row.size(); ++s) probs[s] = row[s] / sum;
    return probs;
}

namespace {

std::size_t step_slot(const ConceptGraph& graph, NodeId from, NodeId to) {
    if (from >= graph.n_nodes() || to >= graph.n_nodes())
        throw Error(ErrorCode::NotAWalk, "node id out of range");
    const int slot = graph.slot_of(from, to);
    if (slot < 0)
        throw Error(ErrorCode::NotAWalk, std::to_string(from) + " and " + std::to_string(to) + " are not adjacent");
    return static_cast<std::size_t>(slot);
}

void require_steps(std::span<const NodeId> path) {
    if (path.size() < 2) throw Error(ErrorCode::NotAWalk, "path has no steps");
}

}  // namespace

EdgeGradient log_prob_gradient(const Policy& policy, std::span<const NodeId> path) {
    require_steps(path);
    const auto& graph = policy.graph();
    const std::size_t k = graph.degree();
    EdgeGradient grad;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        const NodeId from = path[t];
        const std::size_t chosen = step_slot(graph, from, path[t + 1]);
        const auto row = policy.row(from);
        const double inv_sum = 1.0 / policy.row_sum(from);
        for (std::size_t s = 0; s < k; ++s) {
            double g = -inv_sum;
            if (s == chosen) g += 1.0 / row[s];
            grad[from * k + s] += g;
        }
    }
    return grad;
}

double log_prob(const Policy& policy, std::span<const NodeId> path) {
    require_steps(path);
    double total = 0.0;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        const std::size_t chosen = step_slot(policy.graph(), path[t], path[t + 1]);
        total += std::log(policy.row(path[t])[chosen]) - std::log(policy.row_sum(path[t]));
    }
    return total;
}

void apply_update(Policy& policy, std::span<const WeightedPath> rollouts, const UpdateConfig& config) {
    const auto& graph = policy.graph();
    const std::size_t k = graph.degree();

    // sum_m A_m grad_m splits into a per-edge term (A summed over traversals of
    // i->j, divided by theta_ij) and a per-node term (A summed over departures
    // from i, divided by S_i) shared by every out-edge of i.
    std::vector<double> edge_weight(graph.n_directed_edges(), 0.0);
    std::vector<double> node_weight(graph.n_nodes(), 0.0);
    for (const auto& r : rollouts) {
        require_steps(r.path);
        for (std::size_t t = 0; t + 1 < r.path.size(); ++t) {
            const NodeId from = r.path[t];
            const std::size_t slot = step_slot(graph, from, r.path[t + 1]);
            edge_weight[from * k + slot] += r.advantage;
            node_weight[from] += r.advantage;
        }
    }

    const double lr = config.learning_rate;
    for (NodeId i = 0; i < graph.n_nodes(); ++i) {
        if (node_weight[i] == 0.0) {
            bool any = false;
            for (std::size_t s = 0; s < k; ++s) any |= edge_weight[i * k + s] != 0.0;
            if (!any) continue;
        }
        auto row = policy.row(i);
        const double per_node = node_weight[i] / policy.row_sum(i);
        for (std::size_t s = 0; s < k; ++s) {
            const double grad = edge_weight[i * k + s] / row[s] - per_node;
            row[s] = std::clamp(row[s] + lr * grad, config.theta_min, config.theta_max);
        }
    }
}

Policy apply_update(const Policy& policy, std::span<const WeightedPath> rollouts, const UpdateConfig& config) {
    Policy next = policy;
    apply_update(next, rollouts, config);
    return next;
}

namespace {

constexpr char kCheckpointMagic[] = "conet-theta v1\n";

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(v >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorCode::ParseError, "truncated checkpoint");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t{bytes[b]} << (8 * b);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Policy& policy, std::uint64_t step) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    const auto& graph = policy.graph();
    put_u64(out, graph.n_nodes());
    put_u64(out, graph.degree());
    put_u64(out, step);
    put_u64(out, graph.fingerprint());
    for (double t : policy.weights()) put_u64(out, std::bit_cast<std::uint64_t>(t));
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    char magic[sizeof(kCheckpointMagic) - 1];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw Error(ErrorCode::ParseError, path.string() + " is not a conet-theta v1 checkpoint");
    Checkpoint ckpt;
    ckpt.n_nodes = get_u64(in);
    ckpt.degree = get_u64(in);
    ckpt.step = get_u64(in);
    ckpt.graph_fingerprint = get_u64(in);
    if (ckpt.degree != 0 && ckpt.n_nodes > (std::uint64_t{1} << 40) / ckpt.degree)
        throw Error(ErrorCode::ParseError, "implausible checkpoint dimensions");
    ckpt.theta.resize(ckpt.n_nodes * ckpt.degree);
    for (double& t : ckpt.theta) t = std::bit_cast<double>(get_u64(in));
    if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::ParseError, "trailing bytes in checkpoint");
    return ckpt;
}

Policy load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const ConceptGraph> graph,
                       std::uint64_t* step) {
    auto ckpt = read_checkpoint(path);
    if (ckpt.n_nodes != graph->n_nodes() || ckpt.degree != graph->degree() ||
        ckpt.graph_fingerprint != graph->fingerprint())
        throw Error(ErrorCode::CheckpointMismatch, path.string() + " was written for a different graph");
    if (step) *step = ckpt.step;
    return Policy(std::move(graph), std::move(ckpt.theta));
}

}  // namespace conet
