// Acceptance suite: one PASS/FAIL line per primary criterion, detail lines
// indented underneath. Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "conet/error.hpp"
#include "conet/experiment.hpp"
#include "conet/metrics.hpp"
#include "conet/sampler.hpp"
#include "../support.hpp"

using namespace conet;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& title) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, title.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <class... Args>
void detail(const char* fmt, Args... args) {
    std::printf("    ");
    std::printf(fmt, args...);
    std::printf("\n");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

unsigned workers() { return std::clamp(std::thread::hardware_concurrency(), 1u, 8u); }

// 1, 2 and 7 share the default full-scale run.
void full_scale(const fs::path& root) {
    ExperimentConfig cfg;
    cfg.output_dir = root / "default";
    cfg.workers = workers();

    double worst_row = 0.0;
    TrainOptions opts;
    opts.on_update = [&](std::uint64_t, const Policy& p) {
        const auto& g = p.graph();
        for (NodeId i = 0; i < g.n_nodes(); ++i) {
            double s = 0.0;
            for (double x : transition_probs(p, i)) s += x;
            worst_row = std::max(worst_row, std::abs(s - 1.0));
        }
    };
    const auto t0 = std::chrono::steady_clock::now();
    run_training(cfg, opts);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto report = analyze_run(cfg.output_dir);

    const auto& tr = report.transition;
    const auto& s = tr.sigmoid;
    const double gap = std::abs(static_cast<double>(tr.t_var) - s.t_c);
    const bool c1 = !tr.degenerate && report.initial_accuracy < 0.05 && report.max_accuracy > 0.9 &&
                    std::isfinite(s.t_c) && s.width <= 10.0 && gap <= 3.0 && cfg.steps <= 300;
    verdict(1, c1, "learning transition at default scale");
    detail("N=%llu K=%llu M=%llu L_max=%u steps=%llu workers=%u, runtime %.1f s",
           static_cast<unsigned long long>(cfg.n), static_cast<unsigned long long>(cfg.k),
           static_cast<unsigned long long>(cfg.m), cfg.l_max, static_cast<unsigned long long>(cfg.steps), cfg.workers,
           seconds);
    detail("accuracy %.4f -> max %.4f (need < 0.05 and > 0.9)", report.initial_accuracy, report.max_accuracy);
    detail("sigmoid t_c %.3f, w %.3f (need w <= 10), a_inf %.4f, rms %.4f", s.t_c, s.width, s.a_inf, s.rms_residual);
    detail("t_var %llu, |t_var - t_c| = %.3f (need <= 3)", static_cast<unsigned long long>(tr.t_var), gap);

    bool c2 = false;
    if (report.critical && report.post) {
        const auto& crit = *report.critical;
        const auto& post = *report.post;
        const bool tail = crit.power_law.r_squared >= 0.8 && crit.power_law_wins();
        const bool local = post.exponential_wins();
        c2 = tail && local;
        verdict(2, c2, "distributional crossover");
        detail("step %llu tail [%g, %g]: power law r2 %.4f ks %.4f | exponential r2 %.4f ks %.4f -> %s",
               static_cast<unsigned long long>(crit.step), crit.power_law.window.lo, crit.power_law.window.hi,
               crit.power_law.r_squared, crit.power_law.ks_distance, crit.exponential.r_squared,
               crit.exponential.ks_distance, tail ? "power law ahead" : "power law NOT ahead");
        detail("step %llu local [%g, %g]: exponential r2 %.4f ks %.4f | power law r2 %.4f ks %.4f -> %s",
               static_cast<unsigned long long>(post.step), post.exponential.window.lo, post.exponential.window.hi,
               post.exponential.r_squared, post.exponential.ks_distance, post.power_law.r_squared,
               post.power_law.ks_distance, local ? "exponential ahead" : "exponential NOT ahead");
        const double g = crit.power_law.exponent;
        detail("gamma %.4f %s [0.05, 0.5] (soft check); alpha %.4f", g,
               g >= 0.05 && g <= 0.5 ? "inside" : "outside", post.exponential.exponent);
    } else {
        verdict(2, false, "distributional crossover");
        for (const auto& n : report.notes) detail("%s", n.c_str());
    }

    // Fixed points: equal rewards on the full-scale graph leave theta untouched.
    auto graph = std::make_shared<const ConceptGraph>(load_graph(cfg.output_dir / kGraphFile));
    const auto policy = load_checkpoint(cfg.output_dir / checkpoint_file(cfg.steps), graph);
    const auto task = load_manifest(cfg.output_dir).task;
    bool fixed = true;
    for (std::uint32_t l_max : {3u, 200u}) {
        auto batch = sample_batch(policy, task, 2000, l_max, 5, 1, RewardMode::Binary, workers());
        for (auto& r : batch.rollouts) r.reward = l_max == 3 ? 0.0 : 1.0;
        for (auto mode : {AdvantageMode::MeanBaseline, AdvantageMode::MeanStd}) {
            compute_advantages(batch, mode);
            const auto next = apply_update(policy, weighted_paths(batch), cfg.update_config());
            fixed &= std::memcmp(next.weights().data(), policy.weights().data(), policy.weights().size_bytes()) == 0;
        }
    }
    const bool c7 = fixed && worst_row <= 1e-12;
    verdict(7, c7, "fixed points and probability conservation");
    detail("equal-reward batches leave theta bitwise unchanged: %s", fixed ? "yes" : "no");
    detail("max |sum_j pi(j|i) - 1| over all nodes after each of %llu updates: %.3g (need <= 1e-12)",
           static_cast<unsigned long long>(cfg.steps), worst_row);

    // Context for criterion 2, which is instance dependent: the same check on
    // neighbouring seeds. Informational only.
    int held = 0, tried = 0;
    std::string failed;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ExperimentConfig c = cfg;
        c.graph_seed = c.task_seed = c.train_seed = seed;
        c.steps = 40;
        c.output_dir = root / ("seed" + std::to_string(seed));
        run_training(c);
        const auto r = analyze_run(c.output_dir);
        ++tried;
        const bool ok = r.critical && r.post && r.critical->power_law.r_squared >= 0.8 &&
                        r.critical->power_law_wins() && r.post->exponential_wins();
        held += ok;
        if (!ok) failed += " " + std::to_string(seed);
        fs::remove_all(c.output_dir);
    }
    detail("info: criterion 2 holds on %d of %d seeds 1..10 (40 steps each); fails on:%s", held, tried,
           failed.empty() ? " none" : failed.c_str());
}

void gradient_oracle() {
    std::mt19937_64 gen(20240601);
    const double h = 1e-6;
    double worst = 0.0;
    std::size_t edges = 0;
    for (int inst = 0; inst < 100; ++inst) {
        std::size_t n = 0, k = 0;
        do {
            n = 3 + gen() % 18;  // 3..20
            k = 2 + gen() % 5;   // 2..6
        } while (k >= n || (n * k) % 2);
        const auto g = std::make_shared<const ConceptGraph>(generate_regular_graph(n, k, gen()));
        const auto theta = testing::random_theta(g->n_directed_edges(), gen(), 1e-3, 1.0 - 1e-3);
        const Policy p(g, theta);
        std::vector<NodeId> path{static_cast<NodeId>(gen() % n)};
        const std::size_t steps = 1 + gen() % 40;
        for (std::size_t t = 0; t < steps; ++t) path.push_back(g->neighbors(path.back())[gen() % k]);
        for (const auto& [edge, value] : log_prob_gradient(p, path)) {
            std::vector<long double> plus(theta.begin(), theta.end()), minus = plus;
            plus[edge] += h;
            minus[edge] -= h;
            const auto fd = static_cast<double>(
                (testing::oracle_log_prob(*g, plus, path) - testing::oracle_log_prob(*g, minus, path)) / (2.0L * h));
            worst = std::max(worst, std::abs(value - fd) / std::max(std::abs(fd), 1e-3));
            ++edges;
        }
    }
    verdict(3, worst <= 1e-6, "gradient oracle");
    detail("100 instances (n <= 20), %zu touched edges, worst relative error %.3g (need <= 1e-6, h = 1e-6)", edges,
           worst);
}

void exact_oracle() {
    const std::size_t m = 100000;
    std::mt19937_64 gen(4242);
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t n = 10 + 2 * (gen() % 21);  // 10..50
        const std::size_t k = 3 + gen() % 2;
        const auto g = std::make_shared<const ConceptGraph>(generate_regular_graph(n, k, gen()));
        const Policy p(g, testing::random_theta(g->n_directed_edges(), gen()));
        const auto task = select_task(*g, gen(), 2, 4);
        const auto exact = exact_first_passage(p, task, 30);
        const auto batch = sample_batch(p, task, m, 30, gen(), 1, RewardMode::Binary, workers());
        worst = std::max(worst, total_variation(exact, batch));
    }

    const Policy tri(testing::triangle(), std::vector<double>(6, 0.5));
    const TaskInstance tri_task{0, 2, 1};
    FirstPassage closed;
    closed.probability.assign(201, 0.0);
    for (int len = 1; len <= 200; ++len) closed.probability[len] = std::ldexp(1.0, -len);
    closed.failure_mass = std::ldexp(1.0, -200);
    const auto exact = exact_first_passage(tri, tri_task, 200);
    double tv_exact = std::abs(exact.failure_mass - closed.failure_mass);
    for (int len = 1; len <= 200; ++len) tv_exact += std::abs(exact.probability[len] - closed.probability[len]);
    tv_exact *= 0.5;
    const double tv_mc = total_variation(closed, sample_batch(tri, tri_task, m, 200, 99, 1, RewardMode::Binary, workers()));

    const bool ok = worst <= 0.01 && tv_exact <= 0.005 && tv_mc <= 0.005;
    verdict(4, ok, "exact-oracle equivalence");
    detail("10 instances (n <= 50, l_max 30, M = 1e5): worst TV %.4f (need <= 0.01)", worst);
    detail("triangle vs 2^-L: exact TV %.3g, Monte Carlo TV %.4f (need <= 0.005)", tv_exact, tv_mc);
}

void fit_recovery() {
    bool ok = true;
    std::string line;
    char buf[96];
    for (double gamma : {0.16, 0.5, 1.0}) {
        const auto unit = testing::synthetic_histogram([=](double l) { return std::pow(l, -gamma); }, 200, 1000000,
                                                       1000 + static_cast<std::uint64_t>(gamma * 100));
        const auto f = fit_power_law(rebin(unit, Binning::logarithmic(1.25)), {1, 200});
        ok &= std::abs(f.exponent - gamma) <= 0.03;
        std::snprintf(buf, sizeof(buf), " gamma %.2f->%.4f", gamma, f.exponent);
        line += buf;
    }
    const std::vector<std::pair<double, double>> exps{{0.1, 60}, {0.5, 20}};
    for (auto [alpha, hi] : exps) {
        const auto h = testing::synthetic_histogram([=](double l) { return std::exp(-alpha * l); }, 60, 1000000,
                                                    2000 + static_cast<std::uint64_t>(alpha * 100));
        const auto f = fit_exponential(h, {1, hi});
        ok &= std::abs(f.exponent - alpha) <= 0.02;
        std::snprintf(buf, sizeof(buf), " alpha %.2f->%.4f", alpha, f.exponent);
        line += buf;
    }
    verdict(5, ok, "fit recovery");
    detail("1e6 samples each:%s (need +-0.03 / +-0.02)", line.c_str());
}

void determinism(const fs::path& root) {
    ExperimentConfig base;
    base.steps = 25;
    base.snapshot_every = 5;

    auto one = base;
    one.workers = 1;
    one.output_dir = root / "w1";
    run_training(one);
    auto eight = base;
    eight.workers = 8;
    eight.output_dir = root / "w8";
    run_training(eight);

    auto part = base;
    part.workers = 8;
    part.output_dir = root / "resumed";
    TrainOptions stop;
    stop.stop_after = 13;
    run_training(part, stop);
    {
        // Simulate a crash mid-write after the last snapshot.
        std::ofstream torn(part.output_dir / kMetricsFile, std::ios::app);
        torn << "14,0.9";
    }
    TrainOptions resume;
    resume.resume = true;
    run_training(part, resume);

    const auto ref = slurp(one.output_dir / kMetricsFile);
    const bool workers_same = ref == slurp(eight.output_dir / kMetricsFile);
    const bool resume_same = ref == slurp(part.output_dir / kMetricsFile);
    verdict(6, workers_same && resume_same && !ref.empty(), "determinism");
    detail("default config, %llu steps: 1 vs 8 workers %s; interrupted at 13 and resumed %s",
           static_cast<unsigned long long>(base.steps), workers_same ? "byte-identical" : "DIFFER",
           resume_same ? "byte-identical" : "DIFFER");
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / ("conet_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    try {
        full_scale(root);
        gradient_oracle();
        exact_oracle();
        fit_recovery();
        determinism(root);
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance suite aborted: %s\n", e.what());
        ++failures;
    }
    fs::remove_all(root);
    std::printf("%s: %d criterion failure(s)\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
