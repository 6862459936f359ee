#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "schoolnet/graph.hpp"
#include "schoolnet/population.hpp"
#include "schoolnet/rng.hpp"

namespace schoolnet {

/// Term layout of the dyad-independent friendship model.
namespace term {
inline constexpr int edges = 0;
/// Sociality for grades 8..12 (grade 7 is the reference).
inline constexpr int grade_sociality = 1;
/// Sociality for black, hispanic, asian, mixed, missing (white is the reference).
inline constexpr int race_sociality = 6;
inline constexpr int male_sociality = 11;
inline constexpr int school_match = 12;
inline constexpr int male_match = 13;
inline constexpr int female_match = 14;
/// Matching within grades 7..12.
inline constexpr int grade_match = 15;
/// Matching within each of the six race levels.
inline constexpr int race_match = 21;
inline constexpr int count = 27;
}  // namespace term

/// Stable name of a term, e.g. "sociality.grade_8" or "mixing.race_missing".
std::string_view term_name(int k);
/// Inverse of term_name; throws std::invalid_argument.
int term_index(std::string_view name);

struct ErgmCoefficients {
    std::array<double, term::count> theta{};

    /// Coefficients of the fitted friendship model for the study school.
    static ErgmCoefficients defaults();

    double& operator[](int k) { return theta[static_cast<std::size_t>(k)]; }
    double operator[](int k) const { return theta[static_cast<std::size_t>(k)]; }
};

/// JSON keyed by {"edges", "sociality": {...}, "mixing": {...}}; -Inf is the string "-Inf".
std::string to_json(const ErgmCoefficients& coef);
ErgmCoefficients ergm_from_json(const std::string& text);
ErgmCoefficients load_ergm(const std::filesystem::path& path);

/// Change statistics of one dyad.
std::array<double, term::count> dyad_statistics(const Student& a, const Student& b);

/// Log-odds of a friendship between a and b; -infinity when a -Inf mixing term fires.
double dyad_logit(const Student& a, const Student& b, const ErgmCoefficients& coef);
double dyad_probability(const Student& a, const Student& b, const ErgmCoefficients& coef);

/// Independent Bernoulli draw for every dyad, in (i, j) lexicographic order.
FriendshipNetwork simulate_friendship(const Roster& roster, const ErgmCoefficients& coef, Rng& rng);

/// Dyads aggregated by unordered pair of student types (grade, race, sex, school).
struct DyadCell {
    int type_a = 0;
    int type_b = 0;
    std::int64_t dyads = 0;
    std::int64_t edges = 0;
    Student example_a;
    Student example_b;
};

/// Cells with at least one dyad, ordered by (type_a, type_b). Edge counts
/// come from `network` when given.
std::vector<DyadCell> dyad_cells(const Roster& roster, const FriendshipNetwork* network = nullptr);

/// Expected mean degree under the model, summed exactly over dyads.
double expected_mean_degree(const Roster& roster, const ErgmCoefficients& coef);

/// Copy of `coef` with the edges term shifted so the expected mean degree
/// equals `target_mean_degree`.
ErgmCoefficients calibrate_edges(const Roster& roster, const ErgmCoefficients& coef, double target_mean_degree);

class ErgmFitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class TermStatus {
    estimated,
    /// Matching level observed with no edges: coefficient -infinity, no standard error.
    negative_infinity,
    /// No variation in the data or collinear with earlier terms: NaN.
    not_identified,
};

struct ErgmFit {
    ErgmCoefficients coef;
    std::array<std::optional<double>, term::count> standard_error{};
    std::array<TermStatus, term::count> status{};
    double log_likelihood = 0.0;
    int iterations = 0;

    bool estimated(int k) const { return status[static_cast<std::size_t>(k)] == TermStatus::estimated; }
};

/// Maximum-likelihood logistic regression of the dyad indicators on the change
/// statistics. Collinear terms are dropped in term order and reported as not
/// identified.
///
/// Throws ErgmFitError on an empty or complete network, separation in any term
/// other than a matching level with no edges (naming the term), or
/// non-convergence.
ErgmFit fit_ergm(const FriendshipNetwork& network, const Roster& roster, int max_iterations = 100);

/// The true coefficients re-expressed in the parameterization estimated by
/// `fit`: terms the fit dropped are fixed at zero and the remaining ones are
/// solved from the per-cell log-odds. Only meaningful for estimated terms.
ErgmCoefficients identified_coefficients(const Roster& roster, const ErgmCoefficients& truth, const ErgmFit& fit);

}  // namespace schoolnet
