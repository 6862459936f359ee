#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "schoolnet/population.hpp"
#include "schoolnet/rng.hpp"

namespace schoolnet {

inline constexpr int kBreaksPerDay = 5;
inline constexpr int kClassesPerDay = 7;
/// Ten-minute units per 40-minute class period.
inline constexpr int kUnitsPerClass = 4;
inline constexpr int kMaxLunchDurationUnits = 5;

/// Optimizer failure; carries the gradient norm at the last iterate.
class FitError : public std::runtime_error {
  public:
    FitError(const std::string& what, double gradient_norm)
        : std::runtime_error(what), gradient_norm_(gradient_norm) {}
    double gradient_norm() const noexcept { return gradient_norm_; }

  private:
    double gradient_norm_;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Negative-binomial regression of per-break contacts on close-friend count,
/// mean = exp(intercept + log_ratio * friends).
struct NegBinRegressionFit {
    double intercept = 0.0;
    double log_ratio = 0.0;
    double dispersion = 1.0;
    double se_log_ratio = 0.0;
    /// Wald 95% interval for exp(log_ratio).
    Interval ci_ratio;
    double log_likelihood = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;

    double mean(int n_friends) const;
};

/// Right-censored negative binomial: counts above `cutoff` only inform P(Y > cutoff).
struct CensoredNegBinFit {
    double mean = 1.0;
    double dispersion = 1.0;
    int cutoff = 30;
    double log_likelihood = 0.0;
    int iterations = 0;
};

struct ClassNeighborModel {
    std::array<int, 3> support{2, 3, 4};
    std::array<double, 3> probabilities{1.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0};
    int classes_per_day = kClassesPerDay;

    double mean_neighbors() const;
};

/// Fitted parameters that drive degree sampling.
struct DegreeParams {
    NegBinRegressionFit break_fit;
    CensoredNegBinFit lunch_fit;

    /// Bundled fixture: 4.5 per break at zero friends, ratio 1.03, dispersion 2.0;
    /// lunch mean 10.8, dispersion 1.5, cutoff 30.
    static DegreeParams defaults();

    /// Expected daily ten-minute units for a student with `n_friends`
    /// (break + lunch + class).
    double expected_daily_units(int n_friends, const ClassNeighborModel& classes = {}) const;
};

std::string to_json(const DegreeParams& params);
DegreeParams degree_params_from_json(const std::string& text);
DegreeParams load_degree_params(const std::filesystem::path& path);

struct FitOptions {
    int max_iterations = 200;
    /// Stop when the log-likelihood improves by less than this.
    double loglik_tolerance = 1e-8;
    /// Reject the optimum when the final score norm exceeds this.
    double gradient_tolerance = 1e-3;
};

/// Log-likelihood of the break regression at (intercept, log_ratio, dispersion).
double break_log_likelihood(std::span<const int> friends, std::span<const int> counts, double intercept,
                            double log_ratio, double dispersion);

/// Analytic score of `break_log_likelihood` in (intercept, log_ratio, dispersion).
std::array<double, 3> break_gradient(std::span<const int> friends, std::span<const int> counts,
                                     double intercept, double log_ratio, double dispersion);

NegBinRegressionFit fit_break_model(const SurveySample& survey, const FitOptions& options = {});

/// Censored log-likelihood at (mean, dispersion).
double censored_log_likelihood(std::span<const int> counts, int cutoff, double mean, double dispersion);

CensoredNegBinFit fit_lunch_model(const SurveySample& survey, int cutoff = 30, const FitOptions& options = {});

/// One per-break partner count.
int sample_break_degree(const NegBinRegressionFit& fit, int n_friends, Rng& rng);

/// Break partners summed over the five daily breaks; one unit per partner.
int sample_daily_break_units(const NegBinRegressionFit& fit, int n_friends, Rng& rng);

struct LunchDraw {
    int partners = 0;
    int units = 0;
};

/// Lunch partners, each assigned 1-5 ten-minute units uniformly.
LunchDraw sample_lunch_units(const CensoredNegBinFit& fit, Rng& rng);

using ClassNeighborDraw = std::array<int, kClassesPerDay>;

/// Per-student, per-class neighbor counts.
std::vector<ClassNeighborDraw> sample_class_neighbor_degrees(const ClassNeighborModel& model, int n, Rng& rng);

struct DegreeRealization {
    std::vector<int> break_units;
    std::vector<int> lunch_units;
    std::vector<ClassNeighborDraw> class_neighbor_degrees;

    /// break_units + lunch_units per student.
    std::vector<int> break_lunch_units() const;
};

/// Break and lunch degrees for every student (class draws left empty).
DegreeRealization sample_break_lunch_degrees(const DegreeParams& params, std::span<const int> friend_counts,
                                             Rng& rng);

}  // namespace schoolnet
