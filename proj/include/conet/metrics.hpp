#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "conet/policy.hpp"
#include "conet/sampler.hpp"

namespace conet {

// Histogram bin edges are integers starting at 1: linear(w) uses ceil(1 + i*w),
// logarithmic(f) uses ceil(f^i) with duplicates dropped. A bin [lo, hi) holds
// the path lengths lo..hi-1, so its width is the number of lengths it covers.
struct Binning {
    enum class Kind { Linear, Logarithmic };
    Kind kind = Kind::Linear;
    double param = 1.0;  // width or growth factor

    static Binning linear(double width) { return {Kind::Linear, width}; }
    static Binning logarithmic(double factor) { return {Kind::Logarithmic, factor}; }

    /// Edges covering lengths 1..max_length. Throws Error(BadBinning).
    std::vector<std::uint32_t> edges(std::uint32_t max_length) const;

    friend bool operator==(const Binning&, const Binning&) = default;
};

enum class Population { All, Success, Fail, Odd, Even };

struct HistBin {
    std::uint32_t lo = 0;
    std::uint32_t hi = 0;
    std::uint64_t all = 0;
    std::uint64_t success = 0;
    std::uint64_t fail = 0;
    std::uint64_t odd = 0;
    std::uint64_t even = 0;

    std::uint32_t width() const { return hi - lo; }
    std::uint64_t count(Population pop) const;

    friend bool operator==(const HistBin&, const HistBin&) = default;
};

struct LengthHistogram {
    Binning binning;
    std::vector<HistBin> bins;

    std::uint64_t total(Population pop) const;
    /// count / (total(pop) * width); sums to 1 against bin widths.
    double density(std::size_t bin, Population pop) const;
    /// Adds one observation. Throws if the length is outside the bins.
    void add(std::uint32_t length, bool success);

    friend bool operator==(const LengthHistogram&, const LengthHistogram&) = default;
};

/// Empty bins covering 1..max_length.
LengthHistogram make_histogram(Binning binning, std::uint32_t max_length);
LengthHistogram length_histogram(const Batch& batch, Binning binning);
/// Regroup a width-1 histogram under a new binning.
LengthHistogram rebin(const LengthHistogram& unit, Binning binning);

struct StepRecord {
    std::uint64_t step = 0;
    double accuracy = 0.0;
    double mean_len = 0.0;
    double var_len = 0.0;  // population variance, failures counted at l_max
    std::uint64_t success_count = 0;
    std::uint64_t failure_count = 0;
    LengthHistogram histogram;  // linear(1) over 1..l_max
};

StepRecord step_metrics(const Batch& batch);

enum class FitModel { PowerLaw, Exponential };

struct FitWindow {
    double lo = 1.0;
    double hi = 1.0;

    friend bool operator==(const FitWindow&, const FitWindow&) = default;
};

struct FitResult {
    FitModel model = FitModel::PowerLaw;
    double exponent = 0.0;  // gamma for P ~ L^-gamma, alpha for P ~ e^-alpha L
    double amplitude = 0.0;
    FitWindow window;
    double r_squared = 0.0;
    double ks_distance = 0.0;
    std::size_t bins_used = 0;
};

/// Least squares of log density on log bin center (geometric mean of the
/// first and last length in the bin) over non-empty bins inside the window.
/// Throws Error(InsufficientBins) with fewer than three.
FitResult fit_power_law(const LengthHistogram& hist, FitWindow window, Population pop = Population::Success);
/// As fit_power_law, against the arithmetic bin center on a linear axis.
FitResult fit_exponential(const LengthHistogram& hist, FitWindow window, Population pop = Population::Success);

/// True if `a` is the better description: higher r^2, KS distance breaking ties.
bool better_fit(const FitResult& a, const FitResult& b);

struct SigmoidFit {
    double a_inf = 0.0;
    double t_c = 0.0;
    double width = 1.0;
    double rms_residual = 0.0;
};

struct TransitionReport {
    std::uint64_t t_var = 0;
    SigmoidFit sigmoid;
    bool degenerate = false;  // accuracy never exceeded twice its initial value
};

double sigmoid(const SigmoidFit& fit, double t);

/// Needs at least five records, ordered by step.
TransitionReport detect_transition(std::span<const StepRecord> records);

struct FirstPassage {
    std::vector<double> probability;  // probability[L], L = 0..l_max; probability[0] == 0
    double failure_mass = 0.0;

    double total() const;
};

/// Exact P(first arrival at a after L steps) by propagating the occupancy
/// distribution with a absorbing. O(l_max * n * k).
FirstPassage exact_first_passage(const Policy& policy, const TaskInstance& task, std::uint32_t l_max);

/// Total-variation distance between a batch's outcome distribution (length on
/// success, a single failure atom otherwise) and the exact one.
double total_variation(const FirstPassage& exact, const Batch& batch);

}  // namespace conet
