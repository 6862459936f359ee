#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "schoolnet/epidemic.hpp"

using namespace schoolnet;
using schoolnet::fixtures::FixedPlan;
using schoolnet::fixtures::single_grade_roster;

namespace {

const std::vector<ViralLoadCurve> kFlat{ViralLoadCurve{1, 1, 1, 1, 1, 1}};

/// Makes `i` infectious on `day`, first infectious day `day`.
void make_infectious(EpidemicState& s, int i, int day, bool symptomatic) {
    auto& c = s.course[static_cast<std::size_t>(i)];
    c.infection_day = day - 1;
    c.incubation = 1;
    c.symptomatic = symptomatic;
    c.curve_index = 0;
    c.withdrawal_day = kNeverWithdraw;
    s.status[static_cast<std::size_t>(i)] = Status::infectious;
    ++s.infectious;
}

NaturalHistoryParams params_with(double p_bar) {
    NaturalHistoryParams p;
    p.mean_unit_transmission = p_bar;
    return p;
}

}  // namespace

TEST(NaturalHistory, ValidatesPmfs) {
    NaturalHistoryParams p;
    EXPECT_NO_THROW(p.validate());
    p.incubation_pmf = {0.3, 0.3, 0.3};
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(NaturalHistory, CourseFrequencies) {
    const NaturalHistoryParams p;
    auto rng = make_rng(1);
    std::array<int, 4> incubation{};
    int symptomatic = 0, withdraw = 0;
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
        const auto c = sample_course(p, 6, 0, rng);
        ++incubation[static_cast<std::size_t>(c.incubation)];
        symptomatic += c.symptomatic;
        withdraw += c.withdrawal_day != kNeverWithdraw;
        if (!c.symptomatic) {
            EXPECT_EQ(c.withdrawal_day, kNeverWithdraw);
        }
    }
    EXPECT_NEAR(incubation[1] / double(n), 0.30, 0.005);
    EXPECT_NEAR(incubation[2] / double(n), 0.50, 0.005);
    EXPECT_NEAR(incubation[3] / double(n), 0.20, 0.005);
    EXPECT_NEAR(symptomatic / double(n), 0.67, 0.005);
    EXPECT_NEAR(withdraw / double(n), 0.67 * 0.75, 0.005);
}

TEST(NaturalHistory, ScaleGivesMeanUnitProbability) {
    const auto curves = default_viral_load_curves();
    const auto p = params_with(0.004);
    const double scale = calibrate_scale(p, curves);
    double total = 0.0;
    for (std::size_t c = 0; c < curves.size(); ++c)
        for (int d = 0; d < kInfectiousDays; ++d)
            total += scale * curves[c][static_cast<std::size_t>(d)] * (0.67 * 2.0 + 0.33);
    EXPECT_NEAR(total / (curves.size() * kInfectiousDays), 0.004, 1e-15);
}

TEST(NaturalHistory, CurvesHaveUnitMeanAndFileMatches) {
    const auto curves = default_viral_load_curves();
    ASSERT_EQ(curves.size(), 6u);
    for (const auto& c : curves) {
        double s = 0.0;
        for (double v : c) s += v;
        EXPECT_NEAR(s / 6.0, 1.0, 1e-12);
    }
    EXPECT_EQ(load_viral_load_curves(SCHOOLNET_TEST_DATA_DIR "/viral_load_curves.txt"), curves);
    std::stringstream ss;
    write_viral_load_curves(ss, curves);
    EXPECT_EQ(parse_viral_load_curves(ss), curves);
    std::istringstream bad("1 2 3\n");
    EXPECT_ANY_THROW(parse_viral_load_curves(bad));
}

TEST(Infectiousness, WindowAndTreatmentFactor) {
    PersonCourse c;
    c.infection_day = 3;
    c.incubation = 2;
    c.symptomatic = true;
    const double scale = 0.001;
    EXPECT_EQ(infectiousness(c, 4, kFlat, scale, 2.0, false, 0.15), 0.0);
    EXPECT_EQ(infectiousness(c, 11, kFlat, scale, 2.0, false, 0.15), 0.0);
    EXPECT_DOUBLE_EQ(infectiousness(c, 5, kFlat, scale, 2.0, false, 0.15), 0.002);
    EXPECT_DOUBLE_EQ(infectiousness(c, 10, kFlat, scale, 2.0, true, 0.15), 0.002 * 0.85);
}

TEST(Transmission, EscapeFormulaMatchesHandComputation) {
    const auto roster = single_grade_roster(5);
    const EpidemicModel model(roster, params_with(0.05), kFlat, {});
    const ContactNetwork net(5, {{0, 3, 2}, {1, 3, 5}, {2, 3, 1}, {1, 4, 3}, {2, 4, 7}});
    EpidemicState s(5);
    make_infectious(s, 0, 10, true);
    make_infectious(s, 1, 10, false);
    make_infectious(s, 2, 10, true);
    const double base = 0.05 / (0.67 * 2.0 + 0.33);
    const double p0 = 2 * base, p1 = base, p2 = 2 * base;
    const double q3 = std::pow(1 - p0, 2) * std::pow(1 - p1, 5) * std::pow(1 - p2, 1);
    const double q4 = std::pow(1 - p1, 3) * std::pow(1 - p2, 7);
    const auto probs = model.infection_probabilities(s, net, 10);
    ASSERT_EQ(probs.size(), 2u);
    EXPECT_EQ(probs[0].first, 3);
    EXPECT_NEAR(probs[0].second, 1 - q3, 1e-14);
    EXPECT_NEAR(probs[1].second, 1 - q4, 1e-14);

    auto rng = make_rng(2);
    const int trials = 20000;
    int hit3 = 0, hit4 = 0;
    for (int t = 0; t < trials; ++t) {
        EpidemicState copy = s;
        model.transmission_step(copy, net, 10, rng);
        hit3 += copy.status[3] == Status::latent;
        hit4 += copy.status[4] == Status::latent;
    }
    for (auto [hits, p] : {std::pair{hit3, 1 - q3}, std::pair{hit4, 1 - q4}}) {
        const double se = std::sqrt(p * (1 - p) / trials);
        EXPECT_NEAR(hits / double(trials), p, 3 * se);
    }
}

TEST(Transmission, AntiviralFactorsAreExact) {
    const auto roster = single_grade_roster(3);
    InterventionConfig iv;
    iv.kind = InterventionKind::tap;
    const EpidemicModel model(roster, params_with(0.05), kFlat, iv);
    const ContactNetwork net(3, {{0, 1, 4}, {0, 2, 4}});
    EpidemicState s(3);
    make_infectious(s, 0, 5, false);
    const double p = 0.05 / (0.67 * 2.0 + 0.33);
    s.prophylaxis_left[2] = 3;
    auto probs = model.infection_probabilities(s, net, 5);
    EXPECT_NEAR(probs[0].second, 1 - std::pow(1 - p, 4), 1e-15);
    EXPECT_NEAR(probs[1].second, 1 - std::pow(1 - p * 0.37, 4), 1e-15);
    s.treatment_left[0] = 2;
    probs = model.infection_probabilities(s, net, 5);
    EXPECT_NEAR(probs[0].second, 1 - std::pow(1 - p * 0.85, 4), 1e-15);
    EXPECT_NEAR(probs[1].second, 1 - std::pow(1 - p * 0.85 * 0.37, 4), 1e-15);
}

TEST(Transmission, WithdrawnAndClosedDoNotTransmit) {
    std::vector<Student> students;
    for (int i = 0; i < 4; ++i) students.push_back({i, i < 2 ? 9 : 10, Sex::male, Race::white, School::main});
    const Roster roster(students);
    const EpidemicModel model(roster, params_with(0.05), kFlat, {});
    EpidemicState s(4);
    make_infectious(s, 0, 5, true);
    EXPECT_GT(model.unit_probability(s, 0, 5), 0.0);
    s.withdrawn[0] = 1;
    EXPECT_EQ(model.unit_probability(s, 0, 5), 0.0);
    s.withdrawn[0] = 0;
    s.closed[2] = true;  // grade 9
    EXPECT_EQ(model.unit_probability(s, 0, 5), 0.0);
    s.closed[2] = false;
    s.closed[3] = true;  // grade 10: exposures of 2 and 3 are blocked
    const ContactNetwork net(4, {{0, 1, 3}, {0, 2, 3}});
    const auto probs = model.infection_probabilities(s, net, 5);
    ASSERT_EQ(probs.size(), 1u);
    EXPECT_EQ(probs[0].first, 1);
}

TEST(Transmission, ProphylaxisReducesSymptoms) {
    const auto roster = single_grade_roster(2);
    const EpidemicModel model(roster, {}, kFlat, {});
    auto rng = make_rng(3);
    int symptomatic = 0;
    const int n = 40000;
    for (int t = 0; t < n; ++t) {
        EpidemicState s(2);
        s.prophylaxis_left[1] = 4;
        model.infect(s, 1, 0, rng);
        symptomatic += s.course[1].symptomatic;
        EXPECT_TRUE(s.pathogenicity_applied[1]);
    }
    EXPECT_NEAR(symptomatic / double(n), 0.67 * 0.44, 0.01);
}

TEST(Outbreak, StateConservedEveryDay) {
    const int n = 200;
    const auto roster = single_grade_roster(n);
    auto rng = make_rng(4);
    std::vector<WeightedEdge> edges;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 8; ++k) {
            const int j = std::uniform_int_distribution<int>(0, n - 1)(rng);
            if (j != i) edges.push_back({std::min(i, j), std::max(i, j), 4});
        }
    const FixedPlan plan(ContactNetwork(n, edges));
    for (auto kind : {InterventionKind::none, InterventionKind::tap, InterventionKind::grade_closure}) {
        InterventionConfig iv;
        iv.kind = kind;
        const EpidemicModel model(roster, params_with(0.03), default_viral_load_curves(), iv);
        for (int r = 0; r < 30; ++r) {
            const auto out = model.run(plan, derive_seed(5, {static_cast<std::uint64_t>(r)}));
            int infections = 1;
            int day = 0;
            for (const auto& d : out.trajectory) {
                EXPECT_EQ(d.day, day++);
                EXPECT_EQ(d.susceptible + d.latent + d.infectious + d.immune, n);
                EXPECT_LE(d.withdrawn, d.infectious);
                infections += d.new_infections;
            }
            EXPECT_EQ(infections, out.summary.final_size);
            EXPECT_EQ(out.trajectory.back().latent + out.trajectory.back().infectious, 0);
            EXPECT_EQ(out.trajectory.back().immune, out.summary.final_size);
            EXPECT_EQ(out.summary.epidemic, out.summary.final_size > 200);
        }
    }
}

TEST(Outbreak, TapStartsDayAfterOnset) {
    const auto roster = single_grade_roster(3);
    InterventionConfig iv;
    iv.kind = InterventionKind::tap;
    const EpidemicModel model(roster, params_with(0.0001), kFlat, iv);
    const FixedPlan plan(ContactNetwork(3, {{0, 1, 1}}));
    EpidemicState s(3);
    auto rng = make_rng(6);
    model.infect(s, 0, 0, rng);
    s.course[0].incubation = 1;
    s.course[0].symptomatic = true;
    s.course[0].withdrawal_day = kNeverWithdraw;
    s.new_today = 0;
    model.advance_day(s, plan, rng);  // day 0: latent
    model.advance_day(s, plan, rng);  // day 1: onset
    EXPECT_EQ(s.treatment_left[0], 0);
    EXPECT_EQ(s.prophylaxis_left[1], 0);
    model.advance_day(s, plan, rng);  // day 2: treatment and prophylaxis, counted down once
    EXPECT_EQ(s.treatment_left[0], iv.treatment_days - 1);
    EXPECT_EQ(s.prophylaxis_left[1], iv.prophylaxis_days - 1);
    EXPECT_EQ(s.prophylaxis_left[2], 0);
}

TEST(Outbreak, GradeClosesDayAfterOnset) {
    std::vector<Student> students{{0, 9, Sex::male, Race::white, School::main}, {1, 9, Sex::male, Race::white, School::main},
                                  {2, 10, Sex::male, Race::white, School::main}};
    const Roster roster(students);
    InterventionConfig iv;
    iv.kind = InterventionKind::grade_closure;
    const EpidemicModel model(roster, params_with(0.0001), kFlat, iv);
    const FixedPlan plan(ContactNetwork(3, {{0, 1, 1}}));
    EpidemicState s(3);
    auto rng = make_rng(7);
    model.infect(s, 0, 0, rng);
    s.course[0].incubation = 2;
    s.course[0].symptomatic = true;
    for (int d = 0; d < 3; ++d) model.advance_day(s, plan, rng);
    EXPECT_FALSE(s.closed[2]);
    model.advance_day(s, plan, rng);
    EXPECT_TRUE(s.closed[2]);
    EXPECT_FALSE(s.closed[3]);
}

TEST(Outbreak, WithdrawalOnScheduledSymptomDay) {
    const auto roster = single_grade_roster(2);
    const EpidemicModel model(roster, params_with(0.0001), kFlat, {});
    const FixedPlan plan(ContactNetwork(2, {}));
    EpidemicState s(2);
    auto rng = make_rng(8);
    model.infect(s, 0, 0, rng);
    s.course[0].incubation = 1;
    s.course[0].symptomatic = true;
    s.course[0].withdrawal_day = 2;
    model.advance_day(s, plan, rng);
    model.advance_day(s, plan, rng);
    EXPECT_FALSE(s.withdrawn[0]);
    model.advance_day(s, plan, rng);
    EXPECT_TRUE(s.withdrawn[0]);
    for (int d = 0; d < 5; ++d) model.advance_day(s, plan, rng);
    EXPECT_EQ(s.status[0], Status::immune);
    EXPECT_FALSE(s.withdrawn[0]);
}

TEST(Outbreak, DeterministicForSeed) {
    const auto roster = single_grade_roster(50);
    std::vector<WeightedEdge> edges;
    for (int i = 0; i + 1 < 50; ++i) edges.push_back({i, i + 1, 20});
    const FixedPlan plan(ContactNetwork(50, edges));
    const EpidemicModel model(roster, params_with(0.02), default_viral_load_curves(), {});
    const auto a = model.run(plan, 99), b = model.run(plan, 99);
    std::stringstream sa, sb;
    write_trajectory_csv(sa, a.trajectory);
    write_trajectory_csv(sb, b.trajectory);
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(PeakDay, EarliestMaximum) {
    const std::vector<int> counts{0, 2, 5, 5, 1};
    EXPECT_EQ(peak_day(counts, 3), 5);
    const std::vector<int> zeros{0, 0};
    EXPECT_FALSE(peak_day(zeros).has_value());
}
