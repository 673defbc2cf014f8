#include "conet/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "conet/error.hpp"

namespace conet {

Rollout sample_path(const Policy& policy, const TaskInstance& task, std::uint32_t l_max, RngStream& stream,
                    RewardMode reward_mode) {
    if (l_max < 1) throw Error(ErrorCode::InvalidArgument, "l_max must be at least 1");
    const auto& graph = policy.graph();
    Rollout r;
    r.path.reserve(std::min<std::uint32_t>(l_max, 256) + 1);
    r.path.push_back(task.q);
    NodeId at = task.q;
    for (std::uint32_t step = 0; step < l_max; ++step) {
        const auto row = policy.row(at);
        const auto nbrs = graph.neighbors(at);
        double target = stream.uniform() * policy.row_sum(at);
        std::size_t slot = 0;
        for (; slot + 1 < row.size(); ++slot) {
            target -= row[slot];
            if (target < 0.0) break;
        }
        at = nbrs[slot];
        r.path.push_back(at);
        if (at == task.a) {
            r.success = true;
            break;
        }
    }
    r.length = static_cast<std::uint32_t>(r.path.size() - 1);
    switch (reward_mode) {
        case RewardMode::Binary:
            r.reward = r.success ? 1.0 : 0.0;
            break;
        case RewardMode::LengthShaped:
            r.reward = r.success ? 1.0 - static_cast<double>(r.length) / l_max : 0.0;
            break;
    }
    return r;
}

Batch sample_batch(const Policy& policy, const TaskInstance& task, std::size_t m, std::uint32_t l_max,
                   std::uint64_t seed, std::uint64_t step, RewardMode reward_mode, unsigned workers) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "batch needs at least one rollout");
    Batch batch;
    batch.step = step;
    batch.l_max = l_max;
    batch.rollouts.resize(m);

    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RngStream stream(seed, StreamTag::Rollout, static_cast<std::uint32_t>(step),
                             static_cast<std::uint32_t>(i));
            batch.rollouts[i] = sample_path(policy, task, l_max, stream, reward_mode);
        }
    };

    workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(std::min<std::size_t>(m, 256)));
    if (workers == 1) {
        run_range(0, m);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(run_range, m * w / workers, m * (w + 1) / workers);
    }

    double reward_sum = 0.0;
    std::size_t successes = 0;
    for (const auto& r : batch.rollouts) {
        reward_sum += r.reward;
        successes += r.success ? 1 : 0;
    }
    batch.mean_reward = reward_sum / static_cast<double>(m);
    batch.accuracy = static_cast<double>(successes) / static_cast<double>(m);
    return batch;
}

void compute_advantages(Batch& batch, AdvantageMode mode) {
    auto& rs = batch.rollouts;
    if (rs.empty()) return;
    const auto [lo, hi] = std::minmax_element(rs.begin(), rs.end(),
                                              [](const Rollout& a, const Rollout& b) { return a.reward < b.reward; });
    if (lo->reward == hi->reward) {
        for (auto& r : rs) r.advantage = 0.0;
        return;
    }
    double sum = 0.0;
    for (const auto& r : rs) sum += r.reward;
    const double mean = sum / static_cast<double>(rs.size());
    double scale = 1.0;
    if (mode == AdvantageMode::MeanStd) {
        double sq = 0.0;
        for (const auto& r : rs) sq += (r.reward - mean) * (r.reward - mean);
        scale = 1.0 / std::max(std::sqrt(sq / static_cast<double>(rs.size())), kAdvantageStdFloor);
    }
    for (auto& r : rs) r.advantage = (r.reward - mean) * scale;
}

std::vector<WeightedPath> weighted_paths(const Batch& batch) {
    std::vector<WeightedPath> out;
    out.reserve(batch.rollouts.size());
    for (const auto& r : batch.rollouts) out.push_back({r.path, r.advantage});
    return out;
}

void write_rollout_csv(std::ostream& out, const Batch& batch, bool include_paths) {
    char buf[160];
    for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
        const auto& r = batch.rollouts[i];
        std::snprintf(buf, sizeof(buf), "%llu,%zu,%u,%d,%.17g,%.17g", static_cast<unsigned long long>(batch.step), i,
                      r.length, r.success ? 1 : 0, r.reward, r.advantage);
        out << buf;
        if (include_paths) {
            out << ',';
            for (std::size_t t = 0; t < r.path.size(); ++t) out << (t ? " " : "") << r.path[t];
        }
        out << '\n';
    }
}

}  // namespace conet
