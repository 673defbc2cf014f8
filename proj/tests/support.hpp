#pragma once

// Independent oracles and fixtures shared by the test binaries. Nothing here
// calls into the library's samplers or fitters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "conet/graph.hpp"
#include "conet/metrics.hpp"
#include "conet/policy.hpp"

namespace testing {

inline std::shared_ptr<const conet::ConceptGraph> make_graph(std::size_t n, std::size_t k,
                                                             std::vector<std::vector<conet::NodeId>> adj) {
    return std::make_shared<const conet::ConceptGraph>(conet::ConceptGraph::from_adjacency(n, k, std::move(adj), 0));
}

inline std::shared_ptr<const conet::ConceptGraph> triangle() { return make_graph(3, 2, {{1, 2}, {0, 2}, {0, 1}}); }

inline std::shared_ptr<const conet::ConceptGraph> cycle(std::size_t n) {
    std::vector<std::vector<conet::NodeId>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        adj[i] = {static_cast<conet::NodeId>((i + n - 1) % n), static_cast<conet::NodeId>((i + 1) % n)};
        std::sort(adj[i].begin(), adj[i].end());
    }
    return make_graph(n, 2, std::move(adj));
}

inline std::shared_ptr<const conet::ConceptGraph> complete(std::size_t n) {
    std::vector<std::vector<conet::NodeId>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) adj[i].push_back(static_cast<conet::NodeId>(j));
    return make_graph(n, n - 1, std::move(adj));
}

// Plain BFS over an explicit edge list, separate from the library's.
inline std::vector<int> oracle_bfs(const conet::ConceptGraph& g, conet::NodeId src) {
    std::vector<std::vector<conet::NodeId>> adj(g.n_nodes());
    for (std::size_t i = 0; i < g.n_nodes(); ++i)
        for (auto j : g.neighbors(static_cast<conet::NodeId>(i))) adj[i].push_back(j);
    std::vector<int> dist(g.n_nodes(), -1);
    std::deque<conet::NodeId> queue{src};
    dist[src] = 0;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (auto v : adj[u])
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
    }
    return dist;
}

// log pi(path) straight from a weight table, independent of Policy. Extended
// precision keeps finite-difference roundoff well below the tolerance.
inline long double oracle_log_prob(const conet::ConceptGraph& g, const std::vector<long double>& theta,
                            const std::vector<conet::NodeId>& path) {
    const std::size_t k = g.degree();
    long double total = 0.0L;
    for (std::size_t t = 0; t + 1 < path.size(); ++t) {
        long double sum = 0.0L, chosen = 0.0L;
        for (std::size_t s = 0; s < k; ++s) {
            sum += theta[path[t] * k + s];
            if (g.neighbors(path[t])[s] == path[t + 1]) chosen = theta[path[t] * k + s];
        }
        total += std::log(chosen / sum);
    }
    return total;
}

inline std::vector<double> random_theta(std::size_t size, std::uint64_t seed, double lo = 0.05, double hi = 0.95) {
    std::mt19937_64 gen(seed);
    std::vector<double> theta(size);
    for (auto& t : theta) t = lo + (hi - lo) * (static_cast<double>(gen() >> 11) * 0x1.0p-53);
    return theta;
}

// Draws `samples` lengths from p(L) proportional to weight(L) on [1, l_max]
// by inverse CDF with its own generator, and fills a width-1 histogram.
inline conet::LengthHistogram synthetic_histogram(const std::function<double(double)>& weight, std::uint32_t l_max,
                                                  std::size_t samples, std::uint64_t seed) {
    std::vector<double> cdf(l_max);
    double acc = 0.0;
    for (std::uint32_t len = 1; len <= l_max; ++len) cdf[len - 1] = (acc += weight(len));
    for (auto& c : cdf) c /= acc;
    cdf.back() = 1.0;
    std::mt19937_64 gen(seed);
    auto hist = conet::make_histogram(conet::Binning::linear(1), l_max);
    for (std::size_t s = 0; s < samples; ++s) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        const auto idx = static_cast<std::uint32_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        hist.add(std::min(idx, l_max - 1) + 1, true);
    }
    return hist;
}

// Per-test scratch directory under the system temp dir, removed on exit.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("conet_test_" + name + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
