#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "schoolnet/graph.hpp"
#include "schoolnet/population.hpp"
#include "schoolnet/rng.hpp"
#include "schoolnet/season_plan.hpp"

namespace schoolnet {

inline constexpr int kInfectiousDays = 6;
inline constexpr int kEpidemicThreshold = 200;
/// withdrawal_day value for students who never withdraw.
inline constexpr int kNeverWithdraw = 0;

struct NaturalHistoryParams {
    /// P(incubation = 1, 2, 3 days).
    std::array<double, 3> incubation_pmf{0.30, 0.50, 0.20};
    double symptomatic_prob = 0.67;
    double symptomatic_multiplier = 2.0;
    /// P(withdraw on symptom day 1, 2, 3, never) for a symptomatic student.
    std::array<double, 4> withdrawal_pmf{0.203, 0.397, 0.15, 0.25};
    /// Mean per-unit transmission probability p-bar.
    double mean_unit_transmission = 0.004;

    /// Throws std::invalid_argument if a pmf does not sum to 1 or a value is out of range.
    void validate() const;
};

/// Relative viral load on each infectious day.
using ViralLoadCurve = std::array<double, kInfectiousDays>;

/// Six unimodal curves peaking on infectious days 1, 1, 2, 2, 3, 3 with
/// log-linear rise and decay, each scaled to mean 1.
std::vector<ViralLoadCurve> default_viral_load_curves();
/// Whitespace-separated rows of six nonnegative loads; `#` starts a comment.
std::vector<ViralLoadCurve> parse_viral_load_curves(std::istream& in);
std::vector<ViralLoadCurve> load_viral_load_curves(const std::filesystem::path& path);
void write_viral_load_curves(std::ostream& out, std::span<const ViralLoadCurve> curves);

struct PersonCourse {
    int infection_day = 0;
    int incubation = 1;
    bool symptomatic = false;
    int curve_index = 0;
    /// Symptom day (1..3) on which the student stays home, or kNeverWithdraw.
    int withdrawal_day = kNeverWithdraw;

    /// First infectious day, which is also the symptom onset day.
    int onset_day() const noexcept { return infection_day + incubation; }
    /// First day back as immune.
    int immune_day() const noexcept { return onset_day() + kInfectiousDays; }
};

/// `symptomatic_factor` scales the symptomatic probability (pathogenicity efficacy).
PersonCourse sample_course(const NaturalHistoryParams& params, int curve_count, int day, Rng& rng,
                           double symptomatic_factor = 1.0);

/// Scale that makes the mean per-unit probability over curves, symptom status
/// and infectious days equal p-bar. Throws if the mean load is zero.
double calibrate_scale(const NaturalHistoryParams& params, std::span<const ViralLoadCurve> curves);

/// Per-unit transmission probability of `course` on `day`; zero outside the
/// infectious window, clamped to [0, 1].
double infectiousness(const PersonCourse& course, int day, std::span<const ViralLoadCurve> curves, double scale,
                      double symptomatic_multiplier, bool treated, double ave_i);

enum class InterventionKind { none, tap, grade_closure };
std::string_view to_string(InterventionKind k);
InterventionKind parse_intervention(std::string_view s);

struct InterventionConfig {
    InterventionKind kind = InterventionKind::none;
    double ave_s = 0.63;
    double ave_i = 0.15;
    double ave_p = 0.56;
    int treatment_days = 5;
    int prophylaxis_days = 10;
    /// Probability that each contact of a case is reported for prophylaxis.
    double reporting_fraction = 1.0;

    void validate() const;
};

enum class Status : std::uint8_t { susceptible, latent, infectious, immune };

struct DayRecord {
    int day = 0;
    int susceptible = 0;
    int latent = 0;
    int infectious = 0;
    int immune = 0;
    int withdrawn = 0;
    int new_infections = 0;
};

struct EpidemicState {
    explicit EpidemicState(int n);

    int n() const noexcept { return static_cast<int>(status.size()); }
    int active() const noexcept { return latent + infectious; }

    int day = 0;
    std::vector<Status> status;
    std::vector<PersonCourse> course;
    std::vector<std::uint8_t> withdrawn;
    std::vector<int> treatment_left;
    std::vector<int> prophylaxis_left;
    /// Pathogenicity efficacy already applied to this person.
    std::vector<std::uint8_t> pathogenicity_applied;
    std::array<bool, kGradeCount> closed{};
    std::vector<int> onsets_today;
    std::vector<int> onsets_yesterday;
    int latent = 0;
    int infectious = 0;
    int immune = 0;
    std::int64_t cumulative = 0;
    int new_today = 0;
    std::vector<DayRecord> trajectory;

    // Scratch space for transmission.
    std::vector<double> log_escape;
    std::vector<int> touched;
};

struct OutcomeSummary {
    bool epidemic = false;
    int final_size = 0;
    /// Earliest day with the most infectious students.
    std::optional<int> peak_date;
};

/// first_day + index of the first maximum; none when all counts are zero.
std::optional<int> peak_day(std::span<const int> counts, int first_day = 0);

struct OutbreakResult {
    std::vector<DayRecord> trajectory;
    OutcomeSummary summary;
};

/// `day,susceptible,latent,infectious,immune,withdrawn,new_infections`.
void write_trajectory_csv(std::ostream& out, std::span<const DayRecord> trajectory);

/// Transmission model over a roster; immutable and shareable across threads.
class EpidemicModel {
  public:
    EpidemicModel(const Roster& roster, NaturalHistoryParams params, std::vector<ViralLoadCurve> curves,
                  InterventionConfig intervention);

    int n() const noexcept { return static_cast<int>(grade_.size()); }
    double scale() const noexcept { return scale_; }
    const NaturalHistoryParams& params() const noexcept { return params_; }
    const InterventionConfig& intervention() const noexcept { return intervention_; }

    /// Puts `student` into the latent state with a course starting on `day`.
    void infect(EpidemicState& state, int student, int day, Rng& rng) const;

    /// Per-unit probability that infectious `i` transmits on `day`, zero if
    /// `i` is withdrawn or in a closed grade.
    double unit_probability(const EpidemicState& state, int i, int day) const;

    /// Infection probability 1 - prod (1 - p_i')^Y_ij for each exposed
    /// susceptible j, in ascending j. p_i' includes j's prophylaxis.
    std::vector<std::pair<int, double>> infection_probabilities(const EpidemicState& state, const ContactNetwork& network,
                                                                int day) const;

    /// Draws infections among exposed susceptibles in ascending order.
    std::vector<int> transmission_step(EpidemicState& state, const ContactNetwork& network, int day, Rng& rng) const;

    void apply_tap(EpidemicState& state, std::span<const int> onsets, const ContactNetwork& onset_network,
                   Rng& rng) const;
    void apply_grade_closure(EpidemicState& state, std::span<const int> onsets) const;

    /// One day: transitions, withdrawal, interventions for yesterday's onsets,
    /// transmission, antiviral countdown, record.
    void advance_day(EpidemicState& state, const DayNetworkSource& plan, Rng& rng) const;

    /// Single outbreak from a uniformly random index case on day 0, run until
    /// nobody is latent or infectious.
    OutbreakResult run(const DayNetworkSource& plan, std::uint64_t seed) const;
    /// Same with a chosen index case.
    OutbreakResult run_from(const DayNetworkSource& plan, int index_case, Rng& rng) const;

  private:
    void transitions(EpidemicState& state) const;

    std::vector<int> grade_;
    NaturalHistoryParams params_;
    std::vector<ViralLoadCurve> curves_;
    InterventionConfig intervention_;
    double scale_ = 0.0;
};

}  // namespace schoolnet
