#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "schoolnet/parallel.hpp"
#include "schoolnet/population.hpp"
#include "schoolnet/rng.hpp"

using namespace schoolnet;

TEST(Rng, DerivedSeedsDifferByPath) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 20; ++a)
        for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, {a, b}));
    EXPECT_EQ(seen.size(), 400u);
    EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
    EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
    auto run = [](unsigned threads) {
        std::vector<std::uint64_t> out(500);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            auto rng = make_rng(3, {i});
            out[i] = rng();
        });
        return out;
    };
    EXPECT_EQ(run(1), run(4));
}

TEST(Parallel, RethrowsWorkerException) {
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 5) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(Roster, CsvRoundTrip) {
    auto rng = make_rng(1);
    RosterWeights w;
    w.sister_fraction = 0.3;
    const auto roster = generate_synthetic_roster(200, w, rng);
    std::stringstream ss;
    write_roster(ss, roster);
    EXPECT_EQ(parse_roster(ss), roster);
}

TEST(Roster, RejectsBadGrade) {
    std::istringstream in("id,grade,sex,race,school\n0,6,male,white,main\n");
    EXPECT_THROW(parse_roster(in), ValidationError);
}

TEST(Roster, RejectsUnknownLevel) {
    std::istringstream in("id,grade,sex,race,school\n0,9,robot,white,main\n");
    EXPECT_ANY_THROW(parse_roster(in));
}

TEST(Roster, SyntheticMarginals) {
    auto rng = make_rng(2);
    const auto roster = generate_synthetic_roster(20000, {}, rng);
    int male = 0, white = 0, sister = 0;
    for (const auto& s : roster.students()) {
        male += s.sex == Sex::male;
        white += s.race == Race::white;
        sister += s.school == School::sister;
    }
    EXPECT_NEAR(male / 20000.0, 0.5, 0.015);
    EXPECT_NEAR(white / 20000.0, 0.55, 0.015);
    EXPECT_EQ(sister, 0);
    for (const auto& g : roster.by_grade()) EXPECT_NEAR(g.size() / 20000.0, 1.0 / 6.0, 0.015);
}

TEST(Survey, CsvRoundTrip) {
    auto rng = make_rng(3);
    const auto survey = generate_synthetic_survey({}, 100, rng);
    std::stringstream ss;
    write_survey(ss, survey);
    EXPECT_EQ(parse_survey(ss), survey);
}

TEST(Survey, PreprocessCapsAndDrops) {
    SurveySample raw({{25, 3, 5, 0.5, NeighborMix::mix}, {4, 3, 41, 0.5, NeighborMix::mix}, {20, 3, 40, 0.7, NeighborMix::mix}});
    const auto s = preprocess_survey(raw);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.records()[0].break_contacts, 20);
    EXPECT_EQ(s.records()[1].n_close_friends, 40);
    EXPECT_DOUBLE_EQ(*s.mean_pct_to_friends(), 0.6);
}

TEST(Survey, BootstrapKeepsSizeAndDrawsFromSample) {
    auto rng = make_rng(4);
    const auto survey = generate_synthetic_survey({}, 50, rng);
    const auto b = bootstrap_resample(survey, rng);
    ASSERT_EQ(b.size(), survey.size());
    for (const auto& r : b.records())
        EXPECT_NE(std::find(survey.records().begin(), survey.records().end(), r), survey.records().end());
}

TEST(Survey, EmptySampleHasNoFriendFraction) {
    SurveySample empty;
    EXPECT_FALSE(empty.mean_pct_to_friends().has_value());
}
