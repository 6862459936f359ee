#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "schoolnet/epidemic.hpp"
#include "schoolnet/ergm.hpp"
#include "schoolnet/season_plan.hpp"

namespace schoolnet {

struct ScenarioSpec {
    std::string name;
    Variant variant = Variant::static_network;
    InterventionConfig intervention;
    std::vector<double> p_grid;
    /// Outbreaks per grid point, split evenly over bootstrap replicates.
    int replicates = 1000;
    /// 1 means a single fit on the full survey, without resampling.
    int bootstrap_replicates = 20;
    int season_length = 200;
    std::uint64_t seed = 1;

    void validate() const;
    /// Label used in tables, e.g. "tap" or "tap_0.75".
    std::string intervention_label() const;
};

std::string to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const std::string& text);
/// A single spec object or {"scenarios": [...]}.
std::vector<ScenarioSpec> load_scenarios(const std::filesystem::path& path);

/// Everything an experiment needs besides the scenario.
struct ExperimentInputs {
    Roster roster;
    FriendshipNetwork friendship;
    /// Preprocessed survey.
    SurveySample survey;
    NaturalHistoryParams natural_history;
    std::vector<ViralLoadCurve> curves = default_viral_load_curves();
    ClassNeighborModel class_model;
    RandomMixingParams random_mixing;
};

struct InputOptions {
    int roster_size = 1074;
    int survey_size = 362;
    double sister_fraction = 0.0;
    /// Mean friendship degree the edges term is shifted to; defaults to the
    /// survey's mean number of close friends. Non-positive keeps the edges term.
    std::optional<double> target_mean_degree;
    std::optional<std::filesystem::path> roster_path;
    std::optional<std::filesystem::path> survey_path;
    std::optional<std::filesystem::path> coefficients_path;
    std::optional<std::filesystem::path> curves_path;
    std::optional<std::filesystem::path> friendship_path;
};

/// Loads or synthesizes roster, survey and friendship network. The survey is
/// preprocessed; the friendship network is simulated from the (calibrated)
/// coefficients unless a file is given.
ExperimentInputs build_inputs(const InputOptions& options, std::uint64_t seed);

struct OutcomeDraw {
    bool epidemic = false;
    int final_size = 0;
    /// -1 when there was no peak.
    int peak_date = -1;
    friend bool operator==(const OutcomeDraw&, const OutcomeDraw&) = default;
};

struct Estimate {
    bool defined = false;
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Estimate&, const Estimate&) = default;
};

struct GridPointResult {
    double p_bar = 0.0;
    Estimate p_epidemic;
    Estimate final_size;
    /// Conditional on an epidemic.
    Estimate peak_date;
    int runs = 0;
    int epidemics = 0;
    /// draws[b][r]: outbreak r of bootstrap replicate b.
    std::vector<std::vector<OutcomeDraw>> draws;
    friend bool operator==(const GridPointResult&, const GridPointResult&) = default;
};

struct ScenarioResult {
    ScenarioSpec spec;
    std::vector<GridPointResult> points;
    std::optional<std::string> failure;
};

inline constexpr int kIntervalResamples = 1000;

/// Mean of each outcome with a nested percentile bootstrap interval: replicates
/// are resampled, then outbreaks within each, 1000 times.
void summarize(GridPointResult& point, std::uint64_t seed);

/// Runs the scenarios. Scenarios with the same seed and season length share
/// bootstrap parameters, and those with the same variant share season plans
/// too, so results are paired draw by draw.
std::vector<ScenarioResult> run_experiments(const std::vector<ScenarioSpec>& specs, const ExperimentInputs& inputs,
                                            unsigned threads = 0);
ScenarioResult run_experiment(const ScenarioSpec& spec, const ExperimentInputs& inputs, unsigned threads = 0);

struct DeltaPoint {
    double p_bar = 0.0;
    /// a - b.
    Estimate p_epidemic_reduction;
    /// a - b.
    Estimate final_size_reduction;
    /// b - a; undefined if either side has no epidemics.
    Estimate peak_shift;
};

/// Paired comparison over identical grids and replicate layouts; throws
/// std::invalid_argument otherwise.
std::vector<DeltaPoint> compare_scenarios(const ScenarioResult& a, const ScenarioResult& b);

enum class OutputFormat { csv, json };

void write_results_csv(std::ostream& out, const std::vector<ScenarioResult>& results);
void write_results_json(std::ostream& out, const std::vector<ScenarioResult>& results);
std::vector<ScenarioResult> read_results_json(std::istream& in);
void write_deltas_csv(std::ostream& out, const std::vector<DeltaPoint>& deltas);
/// Writes to `path`, throwing std::runtime_error if it cannot be opened.
void emit_results(const std::vector<ScenarioResult>& results, OutputFormat format, const std::filesystem::path& path);

}  // namespace schoolnet
