#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "conet/metrics.hpp"

namespace conet {

inline constexpr const char* kMetricsHeader = "step,accuracy,mean_len,var_len,success_count,failure_count";

/// One metrics.csv row (no newline); reals use 17 significant digits.
std::string metrics_csv_row(const StepRecord& rec);
/// Parses metrics.csv. Histograms are left empty. Throws Error(ParseError).
std::vector<StepRecord> read_metrics_csv(std::istream& in);
std::vector<StepRecord> load_metrics_csv(const std::filesystem::path& path);

nlohmann::json to_json(const Binning& binning);
Binning binning_from_json(const nlohmann::json& j);

/// hist_<step>.json document.
nlohmann::json histogram_to_json(const LengthHistogram& hist, std::uint64_t step);
LengthHistogram histogram_from_json(const nlohmann::json& j, std::uint64_t* step = nullptr);
void save_histogram(const std::filesystem::path& path, const LengthHistogram& hist, std::uint64_t step);
LengthHistogram load_histogram(const std::filesystem::path& path, std::uint64_t* step = nullptr);

const char* to_string(FitModel model);
const char* to_string(Population pop);
Population population_from_string(const std::string& s);

nlohmann::json to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);

/// Throws Error(IoFailure) when the file cannot be read or Error(ParseError)
/// when it is not JSON.
nlohmann::json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace conet
