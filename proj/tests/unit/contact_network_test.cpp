#include <gtest/gtest.h>

#include <numeric>

#include "helpers.hpp"
#include "schoolnet/contact_network.hpp"
#include "schoolnet/ergm.hpp"
#include "schoolnet/season_plan.hpp"

using namespace schoolnet;

namespace {

struct Fixture {
    Roster roster;
    FriendshipNetwork friendship;
    SurveySample survey;
};

const Fixture& school() {
    static const Fixture s = [] {
        Fixture out;
        auto rng = make_rng(21);
        out.roster = generate_synthetic_roster(600, {}, rng);
        out.friendship = simulate_friendship(out.roster, calibrate_edges(out.roster, ErgmCoefficients::defaults(), 7.0), rng);
        out.survey = preprocess_survey(generate_synthetic_survey({}, 362, rng));
        return out;
    }();
    return s;
}

}  // namespace

TEST(ComposeDay, SumsLayersAndClamps) {
    MultiLayer bl(3);
    bl.add(0, 1, 10);
    bl.add(1, 2, 3);
    const ContactNetwork cls(3, {{0, 1, 28}, {0, 2, 8}});
    std::int64_t clamped = 0;
    const auto day = compose_day(bl, cls, &clamped);
    EXPECT_EQ(day.units(0, 1), 38);
    EXPECT_EQ(day.units(1, 0), 38);
    EXPECT_EQ(day.units(1, 2), 3);
    EXPECT_EQ(day.units(0, 2), 8);
    EXPECT_EQ(clamped, 0);
    MultiLayer more(3);
    more.add(0, 1, 11);
    compose_day(more, cls, &clamped);
    EXPECT_EQ(clamped, 1);
}

TEST(BreakLunchLayer, DegreesAndFriendShareExact) {
    const auto& s = school();
    auto rng = make_rng(22);
    const auto real = sample_break_lunch_degrees(DegreeParams::defaults(), s.friendship.degrees(), rng);
    auto units = real.break_lunch_units();
    if (std::accumulate(units.begin(), units.end(), 0) % 2) ++units[0];
    const auto layer = build_break_lunch_layer(s.friendship, units, 0.68, rng);
    for (int i = 0; i < layer.n(); ++i) EXPECT_EQ(layer.row_sum(i), units[static_cast<std::size_t>(i)]);
    EXPECT_EQ(friend_units(layer, s.friendship), MatchConstraints::make(units, 0.68, 10).target_friend_units);
    EXPECT_LE(layer.max_multiplicity(), kBreakLunchMaxMultiplicity);
}

TEST(ClassLayer, WithinGradeMultiplesOfFour) {
    const auto& s = school();
    auto rng = make_rng(23);
    const auto layer = build_class_layer(s.friendship, s.roster, {}, rng);
    std::int64_t friend_neighbors = 0, neighbors = 0;
    for (const auto& e : layer.entries()) {
        EXPECT_EQ(s.roster[static_cast<std::size_t>(e.i)].grade, s.roster[static_cast<std::size_t>(e.j)].grade);
        EXPECT_EQ(e.weight % kUnitsPerClass, 0);
        EXPECT_LE(e.weight, kUnitsPerClass * kMaxSharedClasses);
        neighbors += e.weight / kUnitsPerClass;
        if (s.friendship.are_friends(e.i, e.j)) friend_neighbors += e.weight / kUnitsPerClass;
    }
    EXPECT_NEAR(static_cast<double>(friend_neighbors) / neighbors, 0.5, 0.01);
    const double per_student = 2.0 * static_cast<double>(neighbors) / 600.0;
    EXPECT_NEAR(per_student, 7.0 * 30.0 / 9.0, 0.5);
}

TEST(ClassLayer, ClipsToGradeSize) {
    const auto roster = fixtures::single_grade_roster(3);
    const FriendshipNetwork g(3, {{0, 1}});
    auto rng = make_rng(24);
    const auto neighbors = build_class_neighbors(g, roster, {}, rng);
    // Every draw of 3 or 4 neighbors is cut to the 2 classmates available.
    for (int i = 0; i < 3; ++i) EXPECT_EQ(neighbors.row_sum(i), 2 * kClassesPerDay);
    EXPECT_EQ(neighbors.multiplicity(0, 1), kClassesPerDay);
}

TEST(FriendshipOnly, SpreadsTargetOverFriendEdges) {
    const auto& s = school();
    auto rng = make_rng(25);
    const std::int64_t target = 40000;
    std::int64_t clamped = 0;
    const auto net = friendship_only_network(s.friendship, target, rng, &clamped);
    EXPECT_EQ(clamped, 0);
    EXPECT_EQ(net.total_units(), target);
    int lo = 1000, hi = 0;
    for (const auto& e : net.entries()) {
        EXPECT_TRUE(s.friendship.are_friends(e.i, e.j));
        lo = std::min(lo, e.weight);
        hi = std::max(hi, e.weight);
    }
    EXPECT_LE(hi - lo, 1);
    EXPECT_EQ(net.dyad_count(), s.friendship.edge_count());
}

TEST(FriendshipOnly, ClampsAtDailyMaximum) {
    const FriendshipNetwork g(3, {{0, 1}});
    auto rng = make_rng(26);
    std::int64_t clamped = 0;
    const auto net = friendship_only_network(g, 100, rng, &clamped);
    EXPECT_EQ(net.units(0, 1), kMaxDailyUnits);
    EXPECT_EQ(clamped, 1);
}

TEST(RandomMixing, PartnersAndDurations) {
    auto rng = make_rng(27);
    const RandomMixingParams params;
    EXPECT_NEAR(params.mean_duration(), 4.1, 1e-12);
    const auto net = random_mixing_day(1074, params, rng);
    double partners = 0.0;
    for (int i = 0; i < net.n(); ++i) {
        partners += static_cast<double>(net.contacts(i).size());
        for (const auto& c : net.contacts(i)) EXPECT_TRUE(c.units == 4 || c.units == 5);
    }
    EXPECT_NEAR(partners / net.n(), 36.0, 0.6);
    EXPECT_NEAR(2.0 * static_cast<double>(net.total_units()) / net.n(), 36.0 * 4.1, 3.0);
}

TEST(SeasonPlan, StaticRepeatsOneDay) {
    const auto& s = school();
    PlanOptions o;
    const SeasonPlan plan(s.roster, s.friendship, {DegreeParams::defaults(), 0.68}, o, 1);
    EXPECT_EQ(plan.network(0), plan.network(17));
    const auto bl = plan.break_lunch_layer(0);
    const auto day = compose_day(bl, plan.class_layer());
    EXPECT_EQ(day, *plan.network(3));
}

TEST(SeasonPlan, DynamicKeepsClassesAndRedrawsBreaks) {
    const auto& s = school();
    PlanOptions o;
    o.variant = Variant::dynamic_network;
    o.season_length = 5;
    const SeasonPlan plan(s.roster, s.friendship, {DegreeParams::defaults(), 0.68}, o, 2);
    const auto d1 = plan.network(1);
    const auto d2 = plan.network(2);
    EXPECT_NE(*d1, *d2);
    EXPECT_EQ(d1, plan.network(6));
    for (int day : {1, 2}) EXPECT_EQ(compose_day(plan.break_lunch_layer(day), plan.class_layer()), *plan.network(day));
    const SeasonPlan again(s.roster, s.friendship, {DegreeParams::defaults(), 0.68}, o, 2);
    EXPECT_EQ(*again.network(2), *d2);
}

TEST(SeasonPlan, FriendshipOnlyHitsExpectedTotal) {
    const auto& s = school();
    PlanOptions o;
    o.variant = Variant::friendship_only;
    const auto params = DegreeParams::defaults();
    const SeasonPlan plan(s.roster, s.friendship, {params, 0.68}, o, 3);
    double expected = 0.0;
    for (int f : s.friendship.degrees()) expected += params.expected_daily_units(f, o.class_model);
    EXPECT_EQ(plan.target_total_units(), std::llround(expected / 2.0));
    const auto total = plan.network(0)->total_units();
    EXPECT_LE(total, plan.target_total_units());
    EXPECT_EQ(total == plan.target_total_units(), plan.clamped_dyads() == 0);
}

TEST(SeasonPlan, RandomMixingChangesDaily) {
    const auto& s = school();
    PlanOptions o;
    o.variant = Variant::random_mixing;
    const SeasonPlan plan(s.roster, s.friendship, {DegreeParams::defaults(), 0.68}, o, 4);
    EXPECT_NE(*plan.network(0), *plan.network(1));
    EXPECT_EQ(plan.class_layer().total_units(), 0);
}

TEST(PlanParameters, FullSampleKeepsSurveyFraction) {
    const auto& s = school();
    auto rng = make_rng(28);
    const auto p = estimate_plan_parameters(s.survey, rng, false);
    EXPECT_DOUBLE_EQ(p.friend_fraction, *s.survey.mean_pct_to_friends());
    auto rng2 = make_rng(29);
    const auto q = estimate_plan_parameters(s.survey, rng2, true);
    EXPECT_NE(p.friend_fraction, q.friend_fraction);
}

TEST(Variant, Strings) {
    for (auto v : {Variant::static_network, Variant::dynamic_network, Variant::friendship_only, Variant::random_mixing})
        EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_ANY_THROW(parse_variant("weekly"));
}
