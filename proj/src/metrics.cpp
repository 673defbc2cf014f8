#include "conet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "conet/error.hpp"

namespace conet {

std::vector<std::uint32_t> Binning::edges(std::uint32_t max_length) const {
    if (!std::isfinite(param)) throw Error(ErrorCode::BadBinning, "non-finite binning parameter");
    if (kind == Kind::Linear && param < 1.0)
        throw Error(ErrorCode::BadBinning, "linear bin width must be at least 1");
    if (kind == Kind::Logarithmic && param <= 1.0)
        throw Error(ErrorCode::BadBinning, "logarithmic growth factor must exceed 1");

    std::vector<std::uint32_t> out{1};
    double value = 1.0;
    for (std::size_t i = 1; out.back() <= max_length; ++i) {
        value = kind == Kind::Linear ? 1.0 + static_cast<double>(i) * param : value * param;
        const double edge = std::ceil(value);
        if (edge > static_cast<double>(out.back())) {
            out.push_back(static_cast<std::uint32_t>(std::min(edge, 4294967295.0)));
        }
    }
    return out;
}

std::uint64_t HistBin::count(Population pop) const {
    switch (pop) {
        case Population::All: return all;
        case Population::Success: return success;
        case Population::Fail: return fail;
        case Population::Odd: return odd;
        case Population::Even: return even;
    }
    return 0;
}

std::uint64_t LengthHistogram::total(Population pop) const {
    std::uint64_t t = 0;
    for (const auto& b : bins) t += b.count(pop);
    return t;
}

double LengthHistogram::density(std::size_t bin, Population pop) const {
    const auto t = total(pop);
    if (t == 0) return 0.0;
    const auto& b = bins[bin];
    return static_cast<double>(b.count(pop)) / (static_cast<double>(t) * b.width());
}

void LengthHistogram::add(std::uint32_t length, bool success) {
    auto it = std::upper_bound(bins.begin(), bins.end(), length,
                               [](std::uint32_t len, const HistBin& b) { return len < b.hi; });
    if (it == bins.end() || length < it->lo)
        throw Error(ErrorCode::InvalidArgument, "length " + std::to_string(length) + " outside histogram range");
    ++it->all;
    ++(success ? it->success : it->fail);
    ++(length % 2 == 1 ? it->odd : it->even);
}

LengthHistogram make_histogram(Binning binning, std::uint32_t max_length) {
    const auto edges = binning.edges(max_length);
    LengthHistogram hist;
    hist.binning = binning;
    hist.bins.reserve(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        HistBin b;
        b.lo = edges[i];
        b.hi = edges[i + 1];
        hist.bins.push_back(b);
    }
    return hist;
}

LengthHistogram length_histogram(const Batch& batch, Binning binning) {
    if (batch.rollouts.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
    std::uint32_t max_len = batch.l_max;
    for (const auto& r : batch.rollouts) max_len = std::max(max_len, r.length);
    auto hist = make_histogram(binning, max_len);
    for (const auto& r : batch.rollouts) hist.add(r.length, r.success);
    return hist;
}

LengthHistogram rebin(const LengthHistogram& unit, Binning binning) {
    if (unit.bins.empty()) return make_histogram(binning, 0);
    for (const auto& b : unit.bins)
        if (b.width() != 1) throw Error(ErrorCode::BadBinning, "rebin needs a width-1 source histogram");
    auto hist = make_histogram(binning, unit.bins.back().lo);
    std::size_t j = 0;
    for (const auto& src : unit.bins) {
        while (hist.bins[j].hi <= src.lo) ++j;
        auto& dst = hist.bins[j];
        dst.all += src.all;
        dst.success += src.success;
        dst.fail += src.fail;
        dst.odd += src.odd;
        dst.even += src.even;
    }
    return hist;
}

StepRecord step_metrics(const Batch& batch) {
    if (batch.rollouts.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
    StepRecord rec;
    rec.step = batch.step;
    // Welford's running mean/variance.
    double mean = 0.0;
    double m2 = 0.0;
    std::uint64_t count = 0;
    for (const auto& r : batch.rollouts) {
        ++count;
        const double x = r.length;
        const double delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean);
        (r.success ? rec.success_count : rec.failure_count) += 1;
    }
    rec.mean_len = mean;
    rec.var_len = std::max(0.0, m2 / static_cast<double>(count));
    rec.accuracy = static_cast<double>(rec.success_count) / static_cast<double>(count);
    rec.histogram = length_histogram(batch, Binning::linear(1));
    return rec;
}

namespace {

struct Point {
    double x;
    double y;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LineFit least_squares(const std::vector<Point>& pts) {
    const double n = static_cast<double>(pts.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : pts) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        syy += (p.y - my) * (p.y - my);
    }
    LineFit fit;
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& p : pts) {
        const double e = p.y - (fit.intercept + fit.slope * p.x);
        ss_res += e * e;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

bool inside(const HistBin& b, FitWindow w) {
    return static_cast<double>(b.lo) >= w.lo && static_cast<double>(b.hi - 1) <= w.hi;
}

FitResult fit_model(const LengthHistogram& hist, FitWindow window, Population pop, FitModel model) {
    std::vector<std::size_t> in_window;
    std::vector<Point> pts;
    for (std::size_t i = 0; i < hist.bins.size(); ++i) {
        const auto& b = hist.bins[i];
        if (!inside(b, window)) continue;
        in_window.push_back(i);
        if (b.count(pop) == 0) continue;
        const double first = b.lo;
        const double last = b.hi - 1;
        const double x = model == FitModel::PowerLaw ? std::log(std::sqrt(first * last)) : 0.5 * (first + last);
        pts.push_back({x, std::log(hist.density(i, pop))});
    }
    if (pts.size() < 3)
        throw Error(ErrorCode::InsufficientBins, "window [" + std::to_string(window.lo) + ", " +
                                                     std::to_string(window.hi) + "] has " +
                                                     std::to_string(pts.size()) + " non-empty bins");

    const LineFit line = least_squares(pts);
    FitResult res;
    res.model = model;
    res.exponent = -line.slope;
    res.amplitude = std::exp(line.intercept);
    res.window = window;
    res.r_squared = line.r_squared;
    res.bins_used = pts.size();

    // KS distance between the fitted law truncated to the window and the
    // windowed empirical distribution, evaluated at bin edges.
    const double anchor = hist.bins[in_window.front()].lo;
    auto unnormalized = [&](double len) {
        return model == FitModel::PowerLaw ? std::pow(len, -res.exponent) : std::exp(-res.exponent * (len - anchor));
    };
    std::vector<double> model_mass;
    std::vector<double> emp_mass;
    double model_total = 0.0;
    double emp_total = 0.0;
    for (std::size_t i : in_window) {
        const auto& b = hist.bins[i];
        double mass = 0.0;
        for (std::uint32_t len = b.lo; len < b.hi; ++len) mass += unnormalized(len);
        model_mass.push_back(mass);
        model_total += mass;
        emp_mass.push_back(static_cast<double>(b.count(pop)));
        emp_total += static_cast<double>(b.count(pop));
    }
    double cdf_model = 0.0, cdf_emp = 0.0, ks = 0.0;
    for (std::size_t j = 0; j < model_mass.size(); ++j) {
        cdf_model += model_mass[j] / model_total;
        cdf_emp += emp_mass[j] / emp_total;
        ks = std::max(ks, std::abs(cdf_model - cdf_emp));
    }
    res.ks_distance = ks;
    return res;
}

}  // namespace

FitResult fit_power_law(const LengthHistogram& hist, FitWindow window, Population pop) {
    return fit_model(hist, window, pop, FitModel::PowerLaw);
}

FitResult fit_exponential(const LengthHistogram& hist, FitWindow window, Population pop) {
    return fit_model(hist, window, pop, FitModel::Exponential);
}

bool better_fit(const FitResult& a, const FitResult& b) {
    if (a.r_squared != b.r_squared) return a.r_squared > b.r_squared;
    return a.ks_distance < b.ks_distance;
}

double sigmoid(const SigmoidFit& fit, double t) {
    return fit.a_inf / (1.0 + std::exp(-(t - fit.t_c) / fit.width));
}

namespace {

// Squared error of the sigmoid with the given midpoint/width; the plateau is
// solved in closed form.
struct SigmoidObjective {
    std::span<const double> t;
    std::span<const double> y;

    double operator()(double t_c, double width, double* a_out = nullptr) const {
        double sy = 0.0, ss = 0.0;
        std::vector<double> s(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            s[i] = 1.0 / (1.0 + std::exp(-(t[i] - t_c) / width));
            sy += s[i] * y[i];
            ss += s[i] * s[i];
        }
        const double a = ss > 0.0 ? sy / ss : 0.0;
        double err = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) err += (y[i] - a * s[i]) * (y[i] - a * s[i]);
        if (a_out) *a_out = a;
        return err;
    }
};

// Nelder-Mead on (t_c, log width).
std::array<double, 2> refine(const SigmoidObjective& f, std::array<double, 2> start, std::array<double, 2> step) {
    auto eval = [&](const std::array<double, 2>& p) { return f(p[0], std::exp(p[1])); };
    std::array<std::array<double, 2>, 3> simplex{start, start, start};
    simplex[1][0] += step[0];
    simplex[2][1] += step[1];
    std::array<double, 3> value{};
    for (int i = 0; i < 3; ++i) value[i] = eval(simplex[i]);

    for (int iter = 0; iter < 500; ++iter) {
        std::array<int, 3> order{0, 1, 2};
        std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
        const int best = order[0], mid = order[1], worst = order[2];
        if (std::abs(value[worst] - value[best]) <= 1e-14 * (1.0 + std::abs(value[best]))) break;

        std::array<double, 2> centroid{};
        for (int d = 0; d < 2; ++d) centroid[d] = 0.5 * (simplex[best][d] + simplex[mid][d]);
        auto along = [&](double coef) {
            std::array<double, 2> p{};
            for (int d = 0; d < 2; ++d) p[d] = centroid[d] + coef * (simplex[worst][d] - centroid[d]);
            return p;
        };
        const auto reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < value[best]) {
            const auto expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                value[worst] = fe;
            } else {
                simplex[worst] = reflected;
                value[worst] = fr;
            }
        } else if (fr < value[mid]) {
            simplex[worst] = reflected;
            value[worst] = fr;
        } else {
            const auto contracted = along(0.5);
            const double fc = eval(contracted);
            if (fc < value[worst]) {
                simplex[worst] = contracted;
                value[worst] = fc;
            } else {
                for (int i : {mid, worst}) {
                    for (int d = 0; d < 2; ++d) simplex[i][d] = 0.5 * (simplex[i][d] + simplex[best][d]);
                    value[i] = eval(simplex[i]);
                }
            }
        }
    }
    const auto best = std::min_element(value.begin(), value.end()) - value.begin();
    return simplex[static_cast<std::size_t>(best)];
}

}  // namespace

TransitionReport detect_transition(std::span<const StepRecord> records) {
    if (records.size() < 5) throw Error(ErrorCode::InvalidArgument, "transition detection needs at least 5 records");
    TransitionReport report;

    std::size_t peak = 0;
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].var_len > records[peak].var_len) peak = i;
    report.t_var = records[peak].step;

    std::vector<double> t, y;
    double max_acc = 0.0;
    for (const auto& r : records) {
        t.push_back(static_cast<double>(r.step));
        y.push_back(r.accuracy);
        max_acc = std::max(max_acc, r.accuracy);
    }
    report.degenerate = !(max_acc > 2.0 * records.front().accuracy);

    const SigmoidObjective objective{t, y};
    const double t_lo = t.front();
    const double t_hi = t.back();
    const double span = std::max(t_hi - t_lo, 1.0);
    double best_err = std::numeric_limits<double>::infinity();
    std::array<double, 2> best{t_lo, 0.0};
    constexpr int kCenters = 400;
    constexpr int kWidths = 80;
    for (int i = 0; i <= kCenters; ++i) {
        const double t_c = t_lo + span * i / kCenters;
        for (int j = 0; j <= kWidths; ++j) {
            const double log_w = std::log(0.05) + (std::log(span) - std::log(0.05)) * j / kWidths;
            const double err = objective(t_c, std::exp(log_w));
            if (err < best_err) {
                best_err = err;
                best = {t_c, log_w};
            }
        }
    }
    best = refine(objective, best, {span / kCenters, 0.1});

    SigmoidFit& fit = report.sigmoid;
    fit.t_c = best[0];
    fit.width = std::exp(best[1]);
    const double err = objective(fit.t_c, fit.width, &fit.a_inf);
    fit.rms_residual = std::sqrt(err / static_cast<double>(t.size()));
    return report;
}

double FirstPassage::total() const {
    double s = failure_mass;
    for (double p : probability) s += p;
    return s;
}

FirstPassage exact_first_passage(const Policy& policy, const TaskInstance& task, std::uint32_t l_max) {
    const auto& graph = policy.graph();
    const std::size_t n = graph.n_nodes();
    if (task.q >= n || task.a >= n || task.q == task.a) throw Error(ErrorCode::InvalidArgument, "invalid task");

    FirstPassage out;
    out.probability.assign(l_max + 1, 0.0);
    std::vector<double> here(n, 0.0), next(n, 0.0);
    here[task.q] = 1.0;
    for (std::uint32_t len = 1; len <= l_max; ++len) {
        std::fill(next.begin(), next.end(), 0.0);
        for (NodeId i = 0; i < n; ++i) {
            if (here[i] == 0.0) continue;
            const auto row = policy.row(i);
            const auto nbrs = graph.neighbors(i);
            const double scale = here[i] / policy.row_sum(i);
            for (std::size_t s = 0; s < row.size(); ++s) next[nbrs[s]] += scale * row[s];
        }
        out.probability[len] = next[task.a];
        next[task.a] = 0.0;
        std::swap(here, next);
    }
    for (double p : here) out.failure_mass += p;
    return out;
}

double total_variation(const FirstPassage& exact, const Batch& batch) {
    const std::size_t l_max = exact.probability.size() - 1;
    std::vector<double> empirical(l_max + 1, 0.0);
    double failures = 0.0;
    const double m = static_cast<double>(batch.rollouts.size());
    for (const auto& r : batch.rollouts) {
        if (!r.success) {
            failures += 1.0;
        } else if (r.length <= l_max) {
            empirical[r.length] += 1.0;
        } else {
            throw Error(ErrorCode::InvalidArgument, "batch l_max exceeds oracle horizon");
        }
    }
    double tv = std::abs(failures / m - exact.failure_mass);
    for (std::size_t len = 1; len <= l_max; ++len) tv += std::abs(empirical[len] / m - exact.probability[len]);
    return 0.5 * tv;
}

}  // namespace conet
