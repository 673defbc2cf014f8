#include "conet/metrics_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "conet/error.hpp"

namespace conet {

using nlohmann::json;

namespace {

template <class T>
T parse_number(std::string_view field, std::size_t line) {
    T value{};
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw Error(ErrorCode::ParseError,
                    "metrics.csv line " + std::to_string(line) + ": bad field '" + std::string(field) + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string metrics_csv_row(const StepRecord& rec) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%llu,%llu", static_cast<unsigned long long>(rec.step),
                  rec.accuracy, rec.mean_len, rec.var_len, static_cast<unsigned long long>(rec.success_count),
                  static_cast<unsigned long long>(rec.failure_count));
    return buf;
}

std::vector<StepRecord> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw Error(ErrorCode::ParseError, "metrics.csv: missing or unexpected header");
    std::vector<StepRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6)
            throw Error(ErrorCode::ParseError, "metrics.csv line " + std::to_string(lineno) + ": expected 6 fields");
        StepRecord rec;
        rec.step = parse_number<std::uint64_t>(f[0], lineno);
        rec.accuracy = parse_number<double>(f[1], lineno);
        rec.mean_len = parse_number<double>(f[2], lineno);
        rec.var_len = parse_number<double>(f[3], lineno);
        rec.success_count = parse_number<std::uint64_t>(f[4], lineno);
        rec.failure_count = parse_number<std::uint64_t>(f[5], lineno);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<StepRecord> load_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    return read_metrics_csv(in);
}

json to_json(const Binning& binning) {
    if (binning.kind == Binning::Kind::Linear) return {{"kind", "linear"}, {"width", binning.param}};
    return {{"kind", "logarithmic"}, {"factor", binning.param}};
}

Binning binning_from_json(const json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "linear") return Binning::linear(j.at("width").get<double>());
        if (kind == "logarithmic") return Binning::logarithmic(j.at("factor").get<double>());
        throw Error(ErrorCode::ParseError, "unknown binning kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("binning: ") + e.what());
    }
}

json histogram_to_json(const LengthHistogram& hist, std::uint64_t step) {
    json bins = json::array();
    for (const auto& b : hist.bins)
        bins.push_back({{"lo", b.lo},
                        {"hi", b.hi},
                        {"all", b.all},
                        {"success", b.success},
                        {"fail", b.fail},
                        {"odd", b.odd},
                        {"even", b.even}});
    return {{"step", step}, {"binning", to_json(hist.binning)}, {"bins", std::move(bins)}};
}

LengthHistogram histogram_from_json(const json& j, std::uint64_t* step) {
    try {
        LengthHistogram h;
        h.binning = binning_from_json(j.at("binning"));
        for (const auto& b : j.at("bins")) {
            HistBin bin;
            bin.lo = b.at("lo").get<std::uint32_t>();
            bin.hi = b.at("hi").get<std::uint32_t>();
            bin.all = b.at("all").get<std::uint64_t>();
            bin.success = b.at("success").get<std::uint64_t>();
            bin.fail = b.at("fail").get<std::uint64_t>();
            bin.odd = b.at("odd").get<std::uint64_t>();
            bin.even = b.at("even").get<std::uint64_t>();
            if (bin.hi <= bin.lo) throw Error(ErrorCode::ParseError, "histogram bin with hi <= lo");
            if (!h.bins.empty() && h.bins.back().hi != bin.lo)
                throw Error(ErrorCode::ParseError, "histogram bins are not contiguous");
            h.bins.push_back(bin);
        }
        if (step) *step = j.at("step").get<std::uint64_t>();
        return h;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("histogram: ") + e.what());
    }
}

void save_histogram(const std::filesystem::path& path, const LengthHistogram& hist, std::uint64_t step) {
    save_json(path, histogram_to_json(hist, step));
}

LengthHistogram load_histogram(const std::filesystem::path& path, std::uint64_t* step) {
    return histogram_from_json(load_json(path), step);
}

const char* to_string(FitModel model) {
    return model == FitModel::PowerLaw ? "power_law" : "exponential";
}

const char* to_string(Population pop) {
    switch (pop) {
        case Population::All: return "all";
        case Population::Success: return "success";
        case Population::Fail: return "fail";
        case Population::Odd: return "odd";
        case Population::Even: return "even";
    }
    return "?";
}

Population population_from_string(const std::string& s) {
    for (auto p : {Population::All, Population::Success, Population::Fail, Population::Odd, Population::Even})
        if (s == to_string(p)) return p;
    throw Error(ErrorCode::InvalidArgument, "unknown population '" + s + "'");
}

json to_json(const FitResult& fit) {
    return {{"model", to_string(fit.model)},
            {"exponent", fit.exponent},
            {"amplitude", fit.amplitude},
            {"window", {fit.window.lo, fit.window.hi}},
            {"r_squared", fit.r_squared},
            {"ks_distance", fit.ks_distance},
            {"bins_used", fit.bins_used}};
}

FitResult fit_from_json(const json& j) {
    try {
        FitResult f;
        const auto model = j.at("model").get<std::string>();
        if (model == "power_law")
            f.model = FitModel::PowerLaw;
        else if (model == "exponential")
            f.model = FitModel::Exponential;
        else
            throw Error(ErrorCode::ParseError, "unknown fit model '" + model + "'");
        f.exponent = j.at("exponent").get<double>();
        f.amplitude = j.at("amplitude").get<double>();
        f.window = {j.at("window").at(0).get<double>(), j.at("window").at(1).get<double>()};
        f.r_squared = j.at("r_squared").get<double>();
        f.ks_distance = j.at("ks_distance").get<double>();
        f.bins_used = j.at("bins_used").get<std::size_t>();
        return f;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("fit: ") + e.what());
    }
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

void save_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace conet
