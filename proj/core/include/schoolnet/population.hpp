#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "schoolnet/rng.hpp"

namespace schoolnet {

inline constexpr int kMinGrade = 7;
inline constexpr int kMaxGrade = 12;
inline constexpr int kGradeCount = kMaxGrade - kMinGrade + 1;
inline constexpr int kRaceCount = 6;

enum class Sex { male, female };
enum class Race { white, black, hispanic, asian, mixed, missing };
enum class School { main, sister };
enum class NeighborMix { mostly_friends, mostly_nonfriends, mix };

std::string_view to_string(Sex s);
std::string_view to_string(Race r);
std::string_view to_string(School s);
std::string_view to_string(NeighborMix m);

Sex parse_sex(std::string_view s);
/// Unknown strings map to Race::missing.
Race parse_race(std::string_view s);
School parse_school(std::string_view s);
NeighborMix parse_neighbor_mix(std::string_view s);

/// Malformed input; the message names the offending line.
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input that parses but violates a domain invariant.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Student {
    int id = 0;
    int grade = kMinGrade;
    Sex sex = Sex::female;
    Race race = Race::white;
    School school = School::main;

    int grade_index() const noexcept { return grade - kMinGrade; }
    friend bool operator==(const Student&, const Student&) = default;
};

/// School population. Ids are dense 0..n-1 in storage order.
class Roster {
  public:
    Roster() = default;
    /// Validates grades and re-indexes ids densely; throws ValidationError.
    explicit Roster(std::vector<Student> students);

    std::size_t size() const noexcept { return students_.size(); }
    const Student& operator[](std::size_t i) const { return students_[i]; }
    std::span<const Student> students() const noexcept { return students_; }

    /// Student ids grouped by grade index (0 = grade 7).
    std::array<std::vector<int>, kGradeCount> by_grade() const;

    friend bool operator==(const Roster&, const Roster&) = default;

  private:
    std::vector<Student> students_;
};

Roster parse_roster(std::istream& in);
Roster load_roster(const std::filesystem::path& path);
void write_roster(std::ostream& out, const Roster& roster);

struct RosterWeights {
    std::array<double, kGradeCount> grade{1, 1, 1, 1, 1, 1};
    double male_fraction = 0.5;
    std::array<double, kRaceCount> race{0.55, 0.15, 0.15, 0.05, 0.09, 0.01};
    double sister_fraction = 0.0;
};

/// Independent draws per student; by default everyone attends the main school.
Roster generate_synthetic_roster(int n, const RosterWeights& weights, Rng& rng);

struct SurveyRecord {
    int break_contacts = 0;
    int lunch_contacts = 0;
    int n_close_friends = 0;
    double pct_to_friends = 0.0;
    NeighborMix neighbor_mix = NeighborMix::mix;

    friend bool operator==(const SurveyRecord&, const SurveyRecord&) = default;
};

class SurveySample {
  public:
    SurveySample() = default;
    explicit SurveySample(std::vector<SurveyRecord> records);

    std::span<const SurveyRecord> records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    /// Mean of pct_to_friends (X); empty samples have no X.
    std::optional<double> mean_pct_to_friends() const noexcept { return mean_pct_; }
    double mean_close_friends() const;

    friend bool operator==(const SurveySample&, const SurveySample&) = default;

  private:
    std::vector<SurveyRecord> records_;
    std::optional<double> mean_pct_;
};

SurveySample parse_survey(std::istream& in);
SurveySample load_survey(const std::filesystem::path& path);
void write_survey(std::ostream& out, const SurveySample& survey);

inline constexpr int kBreakContactCap = 20;
inline constexpr int kMaxCloseFriends = 40;

/// Caps break contacts at 20 and drops records reporting more than 40 close friends.
SurveySample preprocess_survey(const SurveySample& raw);

/// Resample records with replacement; same size.
SurveySample bootstrap_resample(const SurveySample& survey, Rng& rng);

struct SyntheticSurveyParams {
    double break_mean0 = 4.5;
    double break_ratio = 1.03;
    double break_dispersion = 2.0;
    double lunch_mean = 10.8;
    double lunch_dispersion = 1.5;
    double pct_to_friends_mean = 0.68;
    /// Beta concentration (alpha + beta) of the pct_to_friends draw.
    double pct_to_friends_concentration = 5.0;
    double friends_mean = 7.0;
    double friends_dispersion = 1.0;
    /// mostly_friends, mostly_nonfriends, mix.
    std::array<double, 3> neighbor_mix_weights{0.13, 0.13, 0.74};
};

/// Records drawn from the negative-binomial degree model; n = 0 is allowed.
SurveySample generate_synthetic_survey(const SyntheticSurveyParams& params, int n, Rng& rng);

}  // namespace schoolnet
