#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "conet/error.hpp"
#include "conet/experiment.hpp"
#include "conet/graph.hpp"
#include "conet/metrics.hpp"
#include "conet/metrics_io.hpp"

using namespace conet;
using nlohmann::json;

namespace {

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigInvalid:
        case ErrorCode::InvalidArgument:
        case ErrorCode::OddDegreeSum:
        case ErrorCode::InfeasibleDegree:
        case ErrorCode::NoFeasiblePair:
        case ErrorCode::BadBinning:
            return 2;
        case ErrorCode::IoFailure:
        case ErrorCode::ParseError:
        case ErrorCode::MissingArtifacts:
        case ErrorCode::CheckpointMismatch:
            return 3;
        default:
            return 1;
    }
}

Binning parse_binning(const std::string& spec) {
    const auto colon = spec.find(':');
    const auto kind = spec.substr(0, colon);
    double param = 1.0;
    if (colon != std::string::npos) {
        try {
            param = std::stod(spec.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad binning parameter in '" + spec + "'");
        }
    }
    if (kind == "linear") return Binning::linear(param);
    if (kind == "log" || kind == "logarithmic") return Binning::logarithmic(param);
    throw Error(ErrorCode::InvalidArgument, "binning must be linear:<width> or log:<factor>");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CoNet concept-network learning simulator"};
    app.require_subcommand(1);

    // generate-graph
    auto* gen = app.add_subcommand("generate-graph", "Generate a K-regular random graph");
    std::uint64_t gen_n = 8000, gen_k = 5, gen_seed = 1;
    std::string gen_out = "graph.txt";
    gen->add_option("--n", gen_n, "Number of nodes")->capture_default_str();
    gen->add_option("--k", gen_k, "Degree")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Graph seed")->capture_default_str();
    gen->add_option("--out", gen_out, "Output file")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Run a training experiment");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool resume = false, quiet = false;
    std::map<std::string, std::string> overrides;
    train->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "Sets graph_seed, task_seed and train_seed");
    train->add_flag("--resume", resume, "Continue from the latest checkpoint in output_dir");
    train->add_flag("--quiet", quiet, "No per-step progress");
    for (const auto& key : config_keys())
        train->add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
            "Config override (JSON value)");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Fit distributions and locate the transition in a run");
    std::string run_dir;
    analyze->add_option("--run", run_dir, "Run directory")->required();

    // replay
    auto* rep = app.add_subcommand("replay", "Resample a batch under a saved checkpoint");
    std::string rep_run, rep_ckpt, rep_out = ".";
    std::uint64_t rep_m = 100000, rep_seed = 1;
    unsigned rep_workers = 1;
    rep->add_option("--run", rep_run, "Run directory holding graph and task")->required();
    rep->add_option("--checkpoint", rep_ckpt, "Checkpoint file")->required();
    rep->add_option("--m", rep_m, "Rollouts")->capture_default_str();
    rep->add_option("--seed", rep_seed, "Sampling seed")->capture_default_str();
    rep->add_option("--out", rep_out, "Output directory")->capture_default_str();
    rep->add_option("--workers", rep_workers, "Sampling threads")->capture_default_str();

    // fit
    auto* fit = app.add_subcommand("fit", "Fit power-law and exponential models to a histogram file");
    std::string fit_hist, fit_model = "both", fit_rebin, fit_pop = "success";
    std::vector<double> fit_window;
    fit->add_option("--hist", fit_hist, "hist_<step>.json")->required()->check(CLI::ExistingFile);
    fit->add_option("--model", fit_model, "power_law, exponential or both")
        ->check(CLI::IsMember({"power_law", "exponential", "both"}))
        ->capture_default_str();
    fit->add_option("--window", fit_window, "Window lo hi")->expected(2)->required();
    fit->add_option("--rebin", fit_rebin, "linear:<width> or log:<factor>");
    fit->add_option("--population", fit_pop, "all, success, fail, odd or even")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            const auto g = generate_regular_graph(gen_n, gen_k, gen_seed);
            save_graph(gen_out, g);
            std::printf("wrote %s: %zu nodes, %zu edges\n", gen_out.c_str(), g.n_nodes(), g.n_edges());
        } else if (*train) {
            ExperimentConfig cfg;
            if (!config_path.empty()) {
                try {
                    cfg = config_from_json(load_json(config_path));
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::ParseError) throw Error(ErrorCode::ConfigInvalid, e.what());
                    throw;
                }
            }
            if (seed) cfg.graph_seed = cfg.task_seed = cfg.train_seed = *seed;
            for (const auto& [key, value] : overrides) apply_override(cfg, key, value);
            TrainOptions opts;
            opts.resume = resume;
            if (!quiet)
                opts.on_step = [](const StepRecord& r) {
                    std::fprintf(stderr, "step %llu  accuracy %.4f  mean_len %.2f  var_len %.1f\n",
                                 static_cast<unsigned long long>(r.step), r.accuracy, r.mean_len, r.var_len);
                };
            const auto manifest = run_training(cfg, opts);
            std::printf("run %s: task %u -> %u (distance %u), %zu steps, config hash %s\n",
                        cfg.output_dir.string().c_str(), manifest.task.q, manifest.task.a, manifest.task.distance,
                        manifest.steps.size(), manifest.config_hash.c_str());
        } else if (*analyze) {
            const auto report = analyze_run(run_dir);
            std::cout << format_report(report, load_manifest(run_dir).config);
        } else if (*rep) {
            const auto r = replay(rep_ckpt, rep_run, rep_m, rep_seed, rep_out, rep_workers);
            std::printf("step %llu  accuracy %.4f  mean_len %.2f  var_len %.1f\nwrote %s\n",
                        static_cast<unsigned long long>(r.record.step), r.record.accuracy, r.record.mean_len,
                        r.record.var_len, r.histogram_path.string().c_str());
        } else if (*fit) {
            auto hist = load_histogram(fit_hist);
            if (!fit_rebin.empty()) hist = rebin(hist, parse_binning(fit_rebin));
            const auto pop = population_from_string(fit_pop);
            const FitWindow window{fit_window.at(0), fit_window.at(1)};
            json out = json::array();
            if (fit_model != "exponential") out.push_back(to_json(fit_power_law(hist, window, pop)));
            if (fit_model != "power_law") out.push_back(to_json(fit_exponential(hist, window, pop)));
            std::cout << out.dump(2) << '\n';
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "conet: %s\n", e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "conet: %s\n", e.what());
        return 1;
    }
    return 0;
}
