#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "conet/graph.hpp"

namespace conet {

enum class AdvantageMode { MeanBaseline, MeanStd };

struct ThetaInit {
    enum class Kind { Constant, UniformRandom };
    Kind kind = Kind::Constant;
    double lo = 0.5;  // the constant when kind == Constant
    double hi = 0.5;

    static ThetaInit constant(double c) { return {Kind::Constant, c, c}; }
    static ThetaInit uniform(double lo, double hi) { return {Kind::UniformRandom, lo, hi}; }

    friend bool operator==(const ThetaInit&, const ThetaInit&) = default;
};

struct UpdateConfig {
    double learning_rate = 0.01;
    AdvantageMode advantage_mode = AdvantageMode::MeanBaseline;
    ThetaInit theta_init = ThetaInit::constant(0.5);
    double theta_min = 1e-6;
    double theta_max = 1.0 - 1e-6;

    /// Throws Error(ConfigInvalid).
    void validate() const;
};

/// Transition strengths theta_ij, one per directed edge, laid out as
/// `node * degree + slot` to match ConceptGraph::neighbors.
class Policy {
public:
    Policy(std::shared_ptr<const ConceptGraph> graph, std::vector<double> theta);

    const ConceptGraph& graph() const { return *graph_; }
    const std::shared_ptr<const ConceptGraph>& graph_ptr() const { return graph_; }

    std::span<const double> row(NodeId node) const {
        return {theta_.data() + node * graph_->degree(), graph_->degree()};
    }
    std::span<double> row(NodeId node) {
        return {theta_.data() + node * graph_->degree(), graph_->degree()};
    }
    double row_sum(NodeId node) const {
        double s = 0.0;
        for (double t : row(node)) s += t;
        return s;
    }

    double theta(NodeId from, NodeId to) const;
    std::span<const double> weights() const { return theta_; }
    std::span<double> weights() { return theta_; }

    friend bool operator==(const Policy& a, const Policy& b) {
        return *a.graph_ == *b.graph_ && a.theta_ == b.theta_;
    }

private:
    std::shared_ptr<const ConceptGraph> graph_;
    std::vector<double> theta_;
};

Policy init_policy(std::shared_ptr<const ConceptGraph> graph, const UpdateConfig& config, std::uint64_t seed);

/// pi(j|i) = theta_ij / sum_k theta_ik, ordered like graph.neighbors(node).
std::vector<double> transition_probs(const Policy& policy, NodeId node);

/// Sparse d/dtheta of log pi(path). Keys are flat directed-edge indices.
using EdgeGradient = std::map<std::size_t, double>;

/// Throws Error(NotAWalk) if the path has no step or visits non-adjacent nodes.
EdgeGradient log_prob_gradient(const Policy& policy, std::span<const NodeId> path);

/// Sum of log pi over the steps of `path`; used by finite-difference checks.
double log_prob(const Policy& policy, std::span<const NodeId> path);

struct WeightedPath {
    std::span<const NodeId> path;
    double advantage = 0.0;
};

/// theta <- clip(theta + lr * sum_m A_m * grad log pi(path_m), theta_min, theta_max).
/// Contributions are accumulated in the order given.
void apply_update(Policy& policy, std::span<const WeightedPath> rollouts, const UpdateConfig& config);
Policy apply_update(const Policy& policy, std::span<const WeightedPath> rollouts, const UpdateConfig& config);

// Checkpoint file: "conet-theta v1\n", then little-endian u64 n, k, step,
// graph fingerprint, followed by n*k little-endian f64 weights (node-major,
// ascending neighbor order).
struct Checkpoint {
    std::uint64_t n_nodes = 0;
    std::uint64_t degree = 0;
    std::uint64_t step = 0;
    std::uint64_t graph_fingerprint = 0;
    std::vector<double> theta;
};

void save_checkpoint(const std::filesystem::path& path, const Policy& policy, std::uint64_t step);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Throws Error(CheckpointMismatch) if the checkpoint was written for another graph.
Policy load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const ConceptGraph> graph,
                       std::uint64_t* step = nullptr);

}  // namespace conet
