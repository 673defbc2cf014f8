#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "conet/graph.hpp"
#include "conet/policy.hpp"
#include "conet/rng.hpp"

namespace conet {

enum class RewardMode {
    Binary,        // r = 1 on success, 0 otherwise
    LengthShaped,  // r = success * (1 - L / l_max)
};

struct Rollout {
    std::vector<NodeId> path;  // starts at q; ends at a on success
    std::uint32_t length = 0;  // edges walked
    bool success = false;
    double reward = 0.0;
    double advantage = 0.0;
};

struct Batch {
    std::uint64_t step = 0;
    std::uint32_t l_max = 0;
    std::vector<Rollout> rollouts;
    double mean_reward = 0.0;
    double accuracy = 0.0;
};

/// First-passage walk from task.q, absorbed on entering task.a or stopped
/// after l_max steps.
Rollout sample_path(const Policy& policy, const TaskInstance& task, std::uint32_t l_max, RngStream& stream,
                    RewardMode reward_mode = RewardMode::Binary);

/// Rollout m draws from RngStream(seed, Rollout, step, m). Results do not
/// depend on `workers`.
Batch sample_batch(const Policy& policy, const TaskInstance& task, std::size_t m, std::uint32_t l_max,
                   std::uint64_t seed, std::uint64_t step, RewardMode reward_mode = RewardMode::Binary,
                   unsigned workers = 1);

inline constexpr double kAdvantageStdFloor = 1e-8;

/// mean_baseline: A = r - mean(r); mean_std: A = (r - mean(r)) / max(std(r), 1e-8).
/// Batches with identical rewards get exactly zero advantages.
void compute_advantages(Batch& batch, AdvantageMode mode);

std::vector<WeightedPath> weighted_paths(const Batch& batch);

/// CSV rows `step,m,L,success,reward,advantage` (no header). With
/// `include_paths`, a seventh column holds the space-separated node sequence.
void write_rollout_csv(std::ostream& out, const Batch& batch, bool include_paths = false);

}  // namespace conet
