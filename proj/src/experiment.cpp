#include "conet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "conet/error.hpp"
#include "conet/metrics_io.hpp"

namespace conet {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

std::uint64_t get_count(const json& v, const std::string& key) {
    if (!v.is_number_unsigned()) invalid(key + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

double get_real(const json& v, const std::string& key) {
    if (!v.is_number()) invalid(key + " must be a number");
    return v.get<double>();
}

bool get_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) invalid(key + " must be true or false");
    return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
    if (!v.is_string()) invalid(key + " must be a string");
    return v.get<std::string>();
}

std::uint32_t get_u32(const json& v, const std::string& key) {
    const auto x = get_count(v, key);
    if (x > UINT32_MAX) invalid(key + " is too large");
    return static_cast<std::uint32_t>(x);
}

const char* to_string(AdvantageMode mode) {
    return mode == AdvantageMode::MeanBaseline ? "mean_baseline" : "mean_std";
}

const char* to_string(RewardMode mode) { return mode == RewardMode::Binary ? "binary" : "length_shaped"; }

json theta_init_json(const ThetaInit& init) {
    if (init.kind == ThetaInit::Kind::Constant) return {{"kind", "constant"}, {"value", init.lo}};
    return {{"kind", "uniform_random"}, {"lo", init.lo}, {"hi", init.hi}};
}

ThetaInit theta_init_from(const json& v) {
    if (!v.is_object() || !v.contains("kind")) invalid("theta_init must be an object with a kind");
    const auto kind = get_string(v.at("kind"), "theta_init.kind");
    auto field = [&](const char* name) {
        if (!v.contains(name)) invalid(std::string("theta_init needs ") + name);
        return get_real(v.at(name), std::string("theta_init.") + name);
    };
    if (kind == "constant") return ThetaInit::constant(field("value"));
    if (kind == "uniform_random") return ThetaInit::uniform(field("lo"), field("hi"));
    invalid("unknown theta_init kind '" + kind + "'");
}

using Setter = void (*)(ExperimentConfig&, const json&);

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"n", [](ExperimentConfig& c, const json& v) { c.n = get_count(v, "n"); }},
        {"k", [](ExperimentConfig& c, const json& v) { c.k = get_count(v, "k"); }},
        {"graph_seed", [](ExperimentConfig& c, const json& v) { c.graph_seed = get_count(v, "graph_seed"); }},
        {"task_seed", [](ExperimentConfig& c, const json& v) { c.task_seed = get_count(v, "task_seed"); }},
        {"train_seed", [](ExperimentConfig& c, const json& v) { c.train_seed = get_count(v, "train_seed"); }},
        {"m", [](ExperimentConfig& c, const json& v) { c.m = get_count(v, "m"); }},
        {"l_max", [](ExperimentConfig& c, const json& v) { c.l_max = get_u32(v, "l_max"); }},
        {"steps", [](ExperimentConfig& c, const json& v) { c.steps = get_count(v, "steps"); }},
        {"learning_rate", [](ExperimentConfig& c, const json& v) { c.learning_rate = get_real(v, "learning_rate"); }},
        {"advantage_mode",
         [](ExperimentConfig& c, const json& v) {
             const auto s = get_string(v, "advantage_mode");
             if (s == "mean_baseline")
                 c.advantage_mode = AdvantageMode::MeanBaseline;
             else if (s == "mean_std")
                 c.advantage_mode = AdvantageMode::MeanStd;
             else
                 invalid("advantage_mode must be mean_baseline or mean_std");
         }},
        {"reward_mode",
         [](ExperimentConfig& c, const json& v) {
             const auto s = get_string(v, "reward_mode");
             if (s == "binary")
                 c.reward_mode = RewardMode::Binary;
             else if (s == "length_shaped")
                 c.reward_mode = RewardMode::LengthShaped;
             else
                 invalid("reward_mode must be binary or length_shaped");
         }},
        {"theta_init", [](ExperimentConfig& c, const json& v) { c.theta_init = theta_init_from(v); }},
        {"theta_min", [](ExperimentConfig& c, const json& v) { c.theta_min = get_real(v, "theta_min"); }},
        {"theta_max", [](ExperimentConfig& c, const json& v) { c.theta_max = get_real(v, "theta_max"); }},
        {"d_min", [](ExperimentConfig& c, const json& v) { c.d_min = get_u32(v, "d_min"); }},
        {"d_max", [](ExperimentConfig& c, const json& v) { c.d_max = get_u32(v, "d_max"); }},
        {"tail_window",
         [](ExperimentConfig& c, const json& v) {
             if (!v.is_array() || v.size() != 2) invalid("tail_window must be [lo, hi]");
             c.tail_window = {get_real(v[0], "tail_window"), get_real(v[1], "tail_window")};
         }},
        {"tail_log_factor",
         [](ExperimentConfig& c, const json& v) { c.tail_log_factor = get_real(v, "tail_log_factor"); }},
        {"fit_include_failures",
         [](ExperimentConfig& c, const json& v) { c.fit_include_failures = get_bool(v, "fit_include_failures"); }},
        {"local_below", [](ExperimentConfig& c, const json& v) { c.local_below = get_real(v, "local_below"); }},
        {"local_above", [](ExperimentConfig& c, const json& v) { c.local_above = get_real(v, "local_above"); }},
        {"local_population",
         [](ExperimentConfig& c, const json& v) {
             try {
                 c.local_population = population_from_string(get_string(v, "local_population"));
             } catch (const Error& e) {
                 if (e.code() == ErrorCode::ConfigInvalid) throw;
                 invalid("local_population must be one of all, success, fail, odd, even");
             }
         }},
        {"post_offset", [](ExperimentConfig& c, const json& v) { c.post_offset = get_count(v, "post_offset"); }},
        {"snapshot_every",
         [](ExperimentConfig& c, const json& v) { c.snapshot_every = get_count(v, "snapshot_every"); }},
        {"hist_every", [](ExperimentConfig& c, const json& v) { c.hist_every = get_count(v, "hist_every"); }},
        {"workers",
         [](ExperimentConfig& c, const json& v) {
             const auto w = get_count(v, "workers");
             if (w > 1024) invalid("workers is too large");
             c.workers = static_cast<unsigned>(w);
         }},
        {"output_dir", [](ExperimentConfig& c, const json& v) { c.output_dir = get_string(v, "output_dir"); }},
        {"dump_rollouts", [](ExperimentConfig& c, const json& v) { c.dump_rollouts = get_bool(v, "dump_rollouts"); }},
        {"dump_paths", [](ExperimentConfig& c, const json& v) { c.dump_paths = get_bool(v, "dump_paths"); }},
    };
    return table;
}

// Fields that change outputs' cadence or location but not the trajectory.
const std::vector<std::string> kRuntimeKeys = {"steps",      "workers",       "output_dir",
                                               "hist_every", "dump_rollouts", "dump_paths",
                                               "snapshot_every"};

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
    std::size_t used = 0;
    std::uint64_t x = 0;
    try {
        x = std::stoull(s, &used, 16);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw Error(ErrorCode::ParseError, "bad hex value '" + s + "'");
    return x;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, "cannot create directory " + dir.string());
}

// Raw data rows of metrics.csv, kept verbatim so a resumed file stays byte-identical.
std::vector<std::string> read_metric_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw Error(ErrorCode::ParseError, path.string() + ": unexpected header");
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const auto step = line.substr(0, comma);
        // A torn final line from an interruption is dropped.
        if (comma == std::string::npos || step != std::to_string(rows.size() + 1)) break;
        if (std::count(line.begin(), line.end(), ',') != 5) break;
        rows.push_back(line);
    }
    return rows;
}

void write_manifest(const fs::path& dir, const RunManifest& manifest) {
    const auto tmp = dir / (std::string(kManifestFile) + ".tmp");
    save_json(tmp, to_json(manifest));
    std::error_code ec;
    fs::rename(tmp, dir / kManifestFile, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot write manifest in " + dir.string());
}

std::size_t modal_success_bin(const LengthHistogram& h) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < h.bins.size(); ++i)
        if (h.bins[i].success > h.bins[best].success) best = i;
    return best;
}

std::optional<fs::path> histogram_for(const RunManifest& manifest, const fs::path& dir, std::uint64_t step) {
    for (const auto& e : manifest.steps)
        if (e.step == step && e.histogram) return dir / *e.histogram;
    return std::nullopt;
}

const char* describe_binning(const Binning& b, char* buf, std::size_t size) {
    if (b.kind == Binning::Kind::Linear)
        std::snprintf(buf, size, "linear(%g)", b.param);
    else
        std::snprintf(buf, size, "logarithmic(%g)", b.param);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n < 3) invalid("n must be at least 3");
    if (k < 2) invalid("k must be at least 2");
    if (n > UINT32_MAX) invalid("n is too large");
    if (m < 1) invalid("m must be at least 1");
    if (m > UINT32_MAX) invalid("m is too large");
    if (l_max < 1) invalid("l_max must be at least 1");
    if (steps > UINT32_MAX) invalid("steps is too large");
    update_config().validate();
    if (d_min < 1 || d_min > d_max) invalid("distance window needs 1 <= d_min <= d_max");
    if (d_max >= n) invalid("d_max must be below n");
    if (!(tail_window.lo >= 1.0 && tail_window.lo < tail_window.hi)) invalid("tail_window needs 1 <= lo < hi");
    if (!(tail_log_factor > 1.0) || !std::isfinite(tail_log_factor)) invalid("tail_log_factor must exceed 1");
    if (!(local_below < local_above) || !std::isfinite(local_below) || !std::isfinite(local_above))
        invalid("local window needs local_below < local_above");
    if (post_offset < 1) invalid("post_offset must be at least 1");
    if (snapshot_every < 1) invalid("snapshot_every must be at least 1");
    if (hist_every < 1) invalid("hist_every must be at least 1");
    if (workers < 1) invalid("workers must be at least 1");
    if (output_dir.empty()) invalid("output_dir must not be empty");
    if (dump_paths && !dump_rollouts) invalid("dump_paths requires dump_rollouts");
}

UpdateConfig ExperimentConfig::update_config() const {
    UpdateConfig u;
    u.learning_rate = learning_rate;
    u.advantage_mode = advantage_mode;
    u.theta_init = theta_init;
    u.theta_min = theta_min;
    u.theta_max = theta_max;
    return u;
}

json to_json(const ExperimentConfig& c) {
    return {
        {"n", c.n},
        {"k", c.k},
        {"graph_seed", c.graph_seed},
        {"task_seed", c.task_seed},
        {"train_seed", c.train_seed},
        {"m", c.m},
        {"l_max", c.l_max},
        {"steps", c.steps},
        {"learning_rate", c.learning_rate},
        {"advantage_mode", to_string(c.advantage_mode)},
        {"reward_mode", to_string(c.reward_mode)},
        {"theta_init", theta_init_json(c.theta_init)},
        {"theta_min", c.theta_min},
        {"theta_max", c.theta_max},
        {"d_min", c.d_min},
        {"d_max", c.d_max},
        {"tail_window", {c.tail_window.lo, c.tail_window.hi}},
        {"tail_log_factor", c.tail_log_factor},
        {"fit_include_failures", c.fit_include_failures},
        {"local_below", c.local_below},
        {"local_above", c.local_above},
        {"local_population", to_string(c.local_population)},
        {"post_offset", c.post_offset},
        {"snapshot_every", c.snapshot_every},
        {"hist_every", c.hist_every},
        {"workers", c.workers},
        {"output_dir", c.output_dir.string()},
        {"dump_rollouts", c.dump_rollouts},
        {"dump_paths", c.dump_paths},
    };
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
    if (!j.is_object()) invalid("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const auto& table = setters();
        const auto it = std::find_if(table.begin(), table.end(), [&](const auto& p) { return p.first == key; });
        if (it == table.end()) invalid("unknown config key '" + key + "'");
        it->second(base, value);
    }
    return base;
}

void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value) {
    json v;
    if (key == "output_dir") {
        v = value;
    } else {
        try {
            v = json::parse(value);
        } catch (const json::parse_error&) {
            v = value;
        }
    }
    config = config_from_json(json{{key, v}}, config);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : setters()) keys.push_back(k);
    return keys;
}

std::string config_hash(const ExperimentConfig& config) {
    auto j = to_json(config);
    for (const auto& k : kRuntimeKeys) j.erase(k);
    const auto canonical = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

bool same_trajectory(const ExperimentConfig& a, const ExperimentConfig& b) { return config_hash(a) == config_hash(b); }

std::string histogram_file(std::uint64_t step) { return "hist_" + std::to_string(step) + ".json"; }
std::string checkpoint_file(std::uint64_t step) { return "theta_" + std::to_string(step) + ".bin"; }

json to_json(const TaskInstance& task) { return {{"q", task.q}, {"a", task.a}, {"distance", task.distance}}; }

TaskInstance task_from_json(const json& j) {
    try {
        return {j.at("q").get<NodeId>(), j.at("a").get<NodeId>(), j.at("distance").get<std::uint32_t>()};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("task: ") + e.what());
    }
}

json to_json(const RunManifest& m) {
    json steps = json::array();
    for (const auto& e : m.steps) {
        json s = {{"step", e.step}, {"wall_seconds", e.wall_seconds}};
        if (e.histogram) s["histogram"] = *e.histogram;
        if (e.checkpoint) s["checkpoint"] = *e.checkpoint;
        if (e.rollouts) s["rollouts"] = *e.rollouts;
        steps.push_back(std::move(s));
    }
    json checkpoints = json::array();
    for (const auto& [step, file] : m.checkpoints) checkpoints.push_back({{"step", step}, {"file", file}});
    return {{"artifact_version", m.artifact_version},
            {"config", to_json(m.config)},
            {"config_hash", m.config_hash},
            {"graph", kGraphFile},
            {"graph_fingerprint", hex64(m.graph_fingerprint)},
            {"task", to_json(m.task)},
            {"task_file", kTaskFile},
            {"metrics", kMetricsFile},
            {"checkpoints", std::move(checkpoints)},
            {"steps", std::move(steps)}};
}

RunManifest manifest_from_json(const json& j) {
    try {
        RunManifest m;
        m.artifact_version = j.at("artifact_version").get<std::string>();
        m.config = config_from_json(j.at("config"));
        m.config_hash = j.at("config_hash").get<std::string>();
        m.graph_fingerprint = parse_hex64(j.at("graph_fingerprint").get<std::string>());
        m.task = task_from_json(j.at("task"));
        for (const auto& c : j.at("checkpoints"))
            m.checkpoints.emplace_back(c.at("step").get<std::uint64_t>(), c.at("file").get<std::string>());
        for (const auto& s : j.at("steps")) {
            StepEntry e;
            e.step = s.at("step").get<std::uint64_t>();
            e.wall_seconds = s.at("wall_seconds").get<double>();
            if (s.contains("histogram")) e.histogram = s["histogram"].get<std::string>();
            if (s.contains("checkpoint")) e.checkpoint = s["checkpoint"].get<std::string>();
            if (s.contains("rollouts")) e.rollouts = s["rollouts"].get<std::string>();
            m.steps.push_back(std::move(e));
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigInvalid) throw Error(ErrorCode::ParseError, e.what());
        throw;
    }
}

RunManifest load_manifest(const fs::path& run_dir) {
    const auto path = run_dir / kManifestFile;
    if (!fs::exists(path)) throw Error(ErrorCode::MissingArtifacts, "no manifest in " + run_dir.string());
    return manifest_from_json(load_json(path));
}

RunManifest run_training(const ExperimentConfig& config, const TrainOptions& options) {
    config.validate();
    const fs::path dir = config.output_dir;
    ensure_dir(dir);
    const auto update = config.update_config();

    std::shared_ptr<const ConceptGraph> graph;
    TaskInstance task;
    std::optional<Policy> policy;
    std::vector<std::string> rows;
    RunManifest manifest;
    std::uint64_t start = 0;

    if (options.resume && fs::exists(dir / kManifestFile)) {
        auto previous = load_manifest(dir);
        if (!same_trajectory(previous.config, config))
            invalid("cannot resume " + dir.string() + ": configuration differs from the original run");
        graph = std::make_shared<const ConceptGraph>(load_graph(dir / kGraphFile));
        if (graph->fingerprint() != previous.graph_fingerprint)
            throw Error(ErrorCode::CheckpointMismatch, "graph file does not match the manifest");
        task = previous.task;
        rows = read_metric_rows(dir / kMetricsFile);
        const std::uint64_t limit = std::min<std::uint64_t>(rows.size(), config.steps);
        std::optional<std::pair<std::uint64_t, std::string>> latest;
        for (const auto& c : previous.checkpoints)
            if (c.first <= limit && (!latest || c.first > latest->first) && fs::exists(dir / c.second)) latest = c;
        if (!latest) throw Error(ErrorCode::MissingArtifacts, "no usable checkpoint in " + dir.string());
        std::uint64_t loaded = 0;
        policy = load_checkpoint(dir / latest->second, graph, &loaded);
        if (loaded != latest->first) throw Error(ErrorCode::CheckpointMismatch, "checkpoint step disagrees with manifest");
        start = latest->first;
        rows.resize(start);
        for (const auto& e : previous.steps)
            if (e.step <= start) manifest.steps.push_back(e);
        for (const auto& c : previous.checkpoints)
            if (c.first <= start) manifest.checkpoints.push_back(c);
    } else {
        graph = std::make_shared<const ConceptGraph>(generate_regular_graph(config.n, config.k, config.graph_seed));
        task = select_task(*graph, config.task_seed, config.d_min, config.d_max);
        policy = init_policy(graph, update, config.train_seed);
        save_graph(dir / kGraphFile, *graph);
        save_json(dir / kTaskFile, to_json(task));
        save_checkpoint(dir / checkpoint_file(0), *policy, 0);
        manifest.checkpoints.emplace_back(0, checkpoint_file(0));
    }

    manifest.config = config;
    manifest.config_hash = config_hash(config);
    manifest.task = task;
    manifest.graph_fingerprint = graph->fingerprint();
    save_json(dir / kConfigFile, to_json(config));

    std::ofstream metrics(dir / kMetricsFile, std::ios::trunc);
    if (!metrics) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / kMetricsFile).string());
    metrics << kMetricsHeader << '\n';
    for (const auto& r : rows) metrics << r << '\n';
    metrics.flush();
    write_manifest(dir, manifest);

    std::uint64_t done = 0;
    for (std::uint64_t t = start + 1; t <= config.steps; ++t) {
        if (options.stop_after && done >= *options.stop_after) break;
        const auto t0 = std::chrono::steady_clock::now();
        auto batch = sample_batch(*policy, task, config.m, config.l_max, config.train_seed, t, config.reward_mode,
                                  config.workers);
        compute_advantages(batch, config.advantage_mode);
        const auto rec = step_metrics(batch);
        metrics << metrics_csv_row(rec) << '\n';
        metrics.flush();
        if (!metrics) throw Error(ErrorCode::IoFailure, "write failed for metrics.csv");

        StepEntry entry;
        entry.step = t;
        if (t % config.hist_every == 0) {
            save_histogram(dir / histogram_file(t), rec.histogram, t);
            entry.histogram = histogram_file(t);
        }
        if (config.dump_rollouts) {
            const auto name = "rollouts_" + std::to_string(t) + ".csv";
            std::ofstream out(dir / name);
            if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + name);
            out << "step,m,L,success,reward,advantage" << (config.dump_paths ? ",path" : "") << '\n';
            write_rollout_csv(out, batch, config.dump_paths);
            entry.rollouts = name;
        }

        apply_update(*policy, weighted_paths(batch), update);
        if (options.on_update) options.on_update(t, *policy);

        const bool snapshot = t % config.snapshot_every == 0 || t == config.steps;
        if (snapshot) {
            save_checkpoint(dir / checkpoint_file(t), *policy, t);
            entry.checkpoint = checkpoint_file(t);
            manifest.checkpoints.emplace_back(t, checkpoint_file(t));
        }
        entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        manifest.steps.push_back(std::move(entry));
        if (snapshot) write_manifest(dir, manifest);
        ++done;
        if (options.on_step) options.on_step(rec);
    }
    write_manifest(dir, manifest);
    return manifest;
}

bool ModelComparison::power_law_wins() const {
    return power_law.r_squared > exponential.r_squared && power_law.ks_distance < exponential.ks_distance;
}

bool ModelComparison::exponential_wins() const {
    return exponential.r_squared > power_law.r_squared && exponential.ks_distance < power_law.ks_distance;
}

AnalysisReport analyze_run(const fs::path& run_dir) {
    const auto manifest = load_manifest(run_dir);
    const auto& cfg = manifest.config;
    if (!fs::exists(run_dir / kMetricsFile))
        throw Error(ErrorCode::MissingArtifacts, "no metrics.csv in " + run_dir.string());
    const auto records = load_metrics_csv(run_dir / kMetricsFile);

    AnalysisReport report;
    if (!records.empty()) {
        report.initial_accuracy = records.front().accuracy;
        for (const auto& r : records) report.max_accuracy = std::max(report.max_accuracy, r.accuracy);
    }
    if (records.size() < 5) {
        report.transition.degenerate = true;
        report.notes.push_back("fewer than five steps recorded; no transition analysis");
    } else {
        report.transition = detect_transition(records);
        if (report.transition.degenerate) report.notes.push_back("no transition detected; fits skipped");
    }

    auto compare = [&](std::uint64_t step, const LengthHistogram& hist, FitWindow window, Population pop,
                       const char* role) -> std::optional<ModelComparison> {
        try {
            ModelComparison c{step, fit_power_law(hist, window, pop), fit_exponential(hist, window, pop)};
            report.fits.push_back({step, role, pop, hist.binning, c.power_law});
            report.fits.push_back({step, role, pop, hist.binning, c.exponential});
            return c;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InsufficientBins) throw;
            report.notes.push_back(std::string(role) + " step " + std::to_string(step) + ": " + e.what());
            return std::nullopt;
        }
    };

    if (!report.transition.degenerate) {
        const auto t_crit = report.transition.t_var;
        if (const auto path = histogram_for(manifest, run_dir, t_crit)) {
            const auto unit = load_histogram(*path);
            const auto binned = rebin(unit, Binning::logarithmic(cfg.tail_log_factor));
            report.critical = compare(t_crit, binned, cfg.tail_window, cfg.tail_population(), "critical");
        } else {
            report.notes.push_back("no histogram stored for critical step " + std::to_string(t_crit));
        }

        const auto t_post = t_crit + cfg.post_offset;
        if (t_post > records.back().step) {
            report.notes.push_back("run ends before step " + std::to_string(t_post) + "; post-transition fit skipped");
        } else if (const auto path = histogram_for(manifest, run_dir, t_post)) {
            const auto unit = load_histogram(*path);
            if (unit.total(Population::Success) == 0) {
                report.notes.push_back("no successes at step " + std::to_string(t_post));
            } else {
                const double mode = unit.bins[modal_success_bin(unit)].lo;
                report.modal_length = mode;
                const FitWindow window{std::max(1.0, mode + cfg.local_below), mode + cfg.local_above};
                report.post = compare(t_post, unit, window, cfg.local_population, "post");
            }
        } else {
            report.notes.push_back("no histogram stored for post step " + std::to_string(t_post));
        }
    }

    json fits = json::array();
    for (const auto& f : report.fits) {
        auto j = to_json(f.fit);
        j["step"] = f.step;
        j["role"] = f.role;
        j["population"] = to_string(f.population);
        j["binning"] = to_json(f.binning);
        fits.push_back(std::move(j));
    }
    save_json(run_dir / kFitsFile, fits);

    std::ofstream out(run_dir / kReportFile);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write report in " + run_dir.string());
    out << format_report(report, cfg);
    return report;
}

std::string format_report(const AnalysisReport& r, const ExperimentConfig& cfg) {
    std::ostringstream os;
    char buf[256];
    os << "config hash: " << config_hash(cfg) << '\n';
    std::snprintf(buf, sizeof(buf), "accuracy: initial %.4f, max %.4f\n", r.initial_accuracy, r.max_accuracy);
    os << buf;
    if (r.transition.degenerate) {
        os << "transition: none detected\n";
    } else {
        const auto& s = r.transition.sigmoid;
        std::snprintf(buf, sizeof(buf),
                      "variance peak t_var: %llu\nsigmoid: a_inf %.4f, t_c %.3f, w %.3f, rms residual %.4g\n",
                      static_cast<unsigned long long>(r.transition.t_var), s.a_inf, s.t_c, s.width, s.rms_residual);
        os << buf;
    }

    auto block = [&](const char* title, const std::optional<ModelComparison>& c, const char* expect) {
        if (!c) return;
        char bdesc[64];
        const auto& fit_bins = std::find_if(r.fits.begin(), r.fits.end(), [&](const NamedFit& f) {
            return f.step == c->step && f.role == title;
        });
        std::snprintf(buf, sizeof(buf), "%s step %llu, %s lengths, %s bins, window [%g, %g]\n", title,
                      static_cast<unsigned long long>(c->step), to_string(fit_bins->population),
                      describe_binning(fit_bins->binning, bdesc, sizeof(bdesc)), c->power_law.window.lo,
                      c->power_law.window.hi);
        os << buf;
        std::snprintf(buf, sizeof(buf), "  power_law    gamma %.4f  r2 %.4f  ks %.4f  bins %zu\n",
                      c->power_law.exponent, c->power_law.r_squared, c->power_law.ks_distance,
                      c->power_law.bins_used);
        os << buf;
        std::snprintf(buf, sizeof(buf), "  exponential  alpha %.4f  r2 %.4f  ks %.4f  bins %zu\n",
                      c->exponential.exponent, c->exponential.r_squared, c->exponential.ks_distance,
                      c->exponential.bins_used);
        os << buf;
        const char* verdict = c->power_law_wins()     ? "power_law preferred (higher r2, lower KS)"
                              : c->exponential_wins() ? "exponential preferred (higher r2, lower KS)"
                              : better_fit(c->power_law, c->exponential)
                                  ? "power_law preferred on r2, exponential on KS"
                                  : "exponential preferred on r2, power_law on KS";
        os << "  verdict: " << verdict << " (expected " << expect << ")\n";
    };
    block("critical", r.critical, "power_law");
    if (r.critical) {
        const double g = r.critical->power_law.exponent;
        std::snprintf(buf, sizeof(buf), "  gamma %.4f %s [0.05, 0.5]\n", g, g >= 0.05 && g <= 0.5 ? "in" : "outside");
        os << buf;
    }
    if (r.modal_length) {
        std::snprintf(buf, sizeof(buf), "modal success length L* at post step: %g\n", *r.modal_length);
        os << buf;
    }
    block("post", r.post, "exponential");
    for (const auto& n : r.notes) os << "note: " << n << '\n';
    return os.str();
}

ReplayResult replay(const fs::path& checkpoint, const fs::path& run_dir, std::uint64_t m, std::uint64_t seed,
                    const fs::path& out_dir, unsigned workers) {
    if (m < 1 || m > UINT32_MAX) throw Error(ErrorCode::InvalidArgument, "replay needs 1 <= m < 2^32");
    const auto manifest = load_manifest(run_dir);
    if (!fs::exists(run_dir / kGraphFile)) throw Error(ErrorCode::MissingArtifacts, "no graph in " + run_dir.string());
    auto graph = std::make_shared<const ConceptGraph>(load_graph(run_dir / kGraphFile));
    std::uint64_t step = 0;
    const auto policy = load_checkpoint(checkpoint, graph, &step);
    const auto& cfg = manifest.config;

    ReplayResult result;
    result.batch = sample_batch(policy, manifest.task, m, cfg.l_max, seed, step, cfg.reward_mode, workers);
    compute_advantages(result.batch, cfg.advantage_mode);
    result.record = step_metrics(result.batch);
    ensure_dir(out_dir);
    result.histogram_path = out_dir / ("replay_" + std::to_string(step) + "_" + std::to_string(seed) + ".json");
    save_histogram(result.histogram_path, result.record.histogram, step);
    return result;
}

}  // namespace conet
