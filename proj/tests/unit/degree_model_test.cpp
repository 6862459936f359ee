#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "schoolnet/degree_model.hpp"
#include "schoolnet/negbin.hpp"

using namespace schoolnet;

namespace {

double reference_log_pmf(int y, double mu, double k) {
    return std::lgamma(y + k) - std::lgamma(k) - std::lgamma(y + 1.0) + k * std::log(k / (k + mu)) +
           y * std::log(mu / (k + mu));
}

SurveySample survey_from(std::vector<int> breaks, std::vector<int> lunches, std::vector<int> friends) {
    std::vector<SurveyRecord> records;
    for (std::size_t i = 0; i < breaks.size(); ++i)
        records.push_back({breaks[i], lunches[i], friends[i], 0.68, NeighborMix::mix});
    return SurveySample(std::move(records));
}

}  // namespace

TEST(NegBin, LogPmfMatchesGammaFormula) {
    for (double mu : {0.5, 4.5, 30.0})
        for (double k : {0.3, 2.0, 50.0})
            for (int y : {0, 1, 7, 60}) EXPECT_NEAR(negbin_log_pmf(y, mu, k), reference_log_pmf(y, mu, k), 1e-9);
}

TEST(NegBin, CdfAndTailAreComplementary) {
    for (int c : {0, 5, 30, 200}) {
        double cdf = 0.0;
        for (int y = 0; y <= c; ++y) cdf += std::exp(reference_log_pmf(y, 10.8, 1.5));
        EXPECT_NEAR(negbin_cdf(c, 10.8, 1.5), cdf, 1e-9);
        EXPECT_NEAR(negbin_upper_tail(c, 10.8, 1.5), 1.0 - cdf, 1e-9);
    }
    EXPECT_GT(negbin_upper_tail(400, 2.0, 5.0), 0.0);
}

TEST(NegBin, SampleMomentsMatch) {
    auto rng = make_rng(1);
    const double mu = 6.0, k = 2.0;
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double y = sample_negbin(mu, k, rng);
        s += y;
        s2 += y * y;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, mu, 0.05);
    EXPECT_NEAR(var, mu + mu * mu / k, 0.5);
}

TEST(BreakModel, GradientMatchesFiniteDifferences) {
    const std::vector<int> friends{0, 1, 3, 5, 8, 2, 9, 12};
    const std::vector<int> counts{3, 6, 4, 9, 2, 5, 12, 7};
    const double a = 1.4, b = 0.04, k = 1.7, h = 1e-6;
    const auto g = break_gradient(friends, counts, a, b, k);
    const double fa = (break_log_likelihood(friends, counts, a + h, b, k) - break_log_likelihood(friends, counts, a - h, b, k)) / (2 * h);
    const double fb = (break_log_likelihood(friends, counts, a, b + h, k) - break_log_likelihood(friends, counts, a, b - h, k)) / (2 * h);
    const double fk = (break_log_likelihood(friends, counts, a, b, k + h) - break_log_likelihood(friends, counts, a, b, k - h)) / (2 * h);
    EXPECT_NEAR(g[0], fa, 1e-5);
    EXPECT_NEAR(g[1], fb, 1e-5);
    EXPECT_NEAR(g[2], fk, 1e-5);
}

TEST(BreakModel, RecoversGeneratingParameters) {
    SyntheticSurveyParams params;
    params.break_mean0 = 4.5;
    params.break_ratio = 1.03;
    params.break_dispersion = 2.0;
    auto rng = make_rng(11);
    const auto fit = fit_break_model(generate_synthetic_survey(params, 5000, rng));
    EXPECT_GE(fit.mean(0), 4.2);
    EXPECT_LE(fit.mean(0), 4.8);
    EXPECT_GE(std::exp(fit.log_ratio), 1.02);
    EXPECT_LE(std::exp(fit.log_ratio), 1.04);
    EXPECT_TRUE(fit.ci_ratio.contains(std::exp(fit.log_ratio)));
}

TEST(BreakModel, ConstantResponse) {
    std::vector<int> breaks(40, 5), lunches(40, 3), friends(40);
    std::iota(friends.begin(), friends.end(), 0);
    for (auto& f : friends) f %= 15;
    const auto fit = fit_break_model(survey_from(breaks, lunches, friends));
    EXPECT_NEAR(std::exp(fit.log_ratio), 1.0, 1e-3);
    EXPECT_NEAR(fit.mean(0), 5.0, 1e-2);
}

TEST(BreakModel, DegenerateDesignThrows) {
    std::vector<int> breaks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, lunches(10, 3), friends(10, 4);
    EXPECT_ANY_THROW(fit_break_model(survey_from(breaks, lunches, friends)));
}

TEST(BreakModel, TooFewRecordsThrows) {
    EXPECT_ANY_THROW(fit_break_model(survey_from({1, 2, 3}, {1, 1, 1}, {1, 2, 3})));
}

TEST(DegreeParams, BundledFixture) {
    const auto p = DegreeParams::defaults();
    EXPECT_NEAR(p.break_fit.mean(0), 4.5, 1e-12);
    EXPECT_NEAR(std::exp(p.break_fit.log_ratio), 1.03, 1e-12);
    EXPECT_DOUBLE_EQ(p.break_fit.ci_ratio.lo, 1.01);
    EXPECT_DOUBLE_EQ(p.break_fit.ci_ratio.hi, 1.04);
}

TEST(DegreeParams, JsonRoundTripAndBundledFile) {
    const auto p = DegreeParams::defaults();
    const auto q = degree_params_from_json(to_json(p));
    EXPECT_EQ(to_json(q), to_json(p));
    const auto bundled = load_degree_params(SCHOOLNET_TEST_DATA_DIR "/default_params.json");
    EXPECT_EQ(to_json(bundled), to_json(p));
}

TEST(LunchModel, RecoversMean) {
    SyntheticSurveyParams params;
    params.lunch_mean = 8.0;
    params.lunch_dispersion = 1.5;
    auto rng = make_rng(12);
    const auto fit = fit_lunch_model(generate_synthetic_survey(params, 5000, rng), 30);
    EXPECT_NEAR(fit.mean, 8.0, 0.8);
}

TEST(LunchModel, UncensoredMleIsSampleMean) {
    std::vector<int> lunches{2, 5, 8, 0, 12, 3, 9, 4, 15, 6, 7, 1};
    std::vector<int> breaks(lunches.size(), 3), friends(lunches.size(), 2);
    const auto fit = fit_lunch_model(survey_from(breaks, lunches, friends), 30);
    const double mean = std::accumulate(lunches.begin(), lunches.end(), 0.0) / lunches.size();
    EXPECT_NEAR(fit.mean, mean, 1e-4);
    const auto wide = fit_lunch_model(survey_from(breaks, lunches, friends), 1000);
    EXPECT_NEAR(wide.mean, fit.mean, 1e-6);
    EXPECT_NEAR(wide.dispersion, fit.dispersion, 1e-4 * fit.dispersion);
}

TEST(LunchModel, CensoringDiscardsMagnitude) {
    std::vector<int> lunches{2, 5, 8, 0, 12, 3, 9, 4, 15, 6, 7, 200};
    std::vector<int> breaks(lunches.size(), 3), friends(lunches.size(), 2);
    const auto a = fit_lunch_model(survey_from(breaks, lunches, friends), 30);
    lunches.back() = 31;
    const auto b = fit_lunch_model(survey_from(breaks, lunches, friends), 30);
    EXPECT_DOUBLE_EQ(a.mean, b.mean);
    EXPECT_DOUBLE_EQ(a.dispersion, b.dispersion);
}

TEST(LunchModel, AllCensoredThrows) {
    std::vector<int> lunches(12, 40), breaks(12, 3), friends(12, 2);
    EXPECT_ANY_THROW(fit_lunch_model(survey_from(breaks, lunches, friends), 30));
}

TEST(Sampling, LunchUnitsBetweenOneAndFivePerPartner) {
    auto rng = make_rng(5);
    const auto p = DegreeParams::defaults();
    for (int i = 0; i < 2000; ++i) {
        const auto d = sample_lunch_units(p.lunch_fit, rng);
        EXPECT_GE(d.units, d.partners);
        EXPECT_LE(d.units, 5 * d.partners);
    }
}

TEST(Sampling, ClassNeighborDrawsOnSupport) {
    auto rng = make_rng(6);
    const ClassNeighborModel model;
    const auto draws = sample_class_neighbor_degrees(model, 3000, rng);
    std::array<int, 5> counts{};
    for (const auto& d : draws)
        for (int x : d) {
            ASSERT_GE(x, 2);
            ASSERT_LE(x, 4);
            ++counts[static_cast<std::size_t>(x)];
        }
    const double total = 3000.0 * kClassesPerDay;
    EXPECT_NEAR(counts[2] / total, 1.0 / 9.0, 0.01);
    EXPECT_NEAR(counts[3] / total, 4.0 / 9.0, 0.015);
    EXPECT_NEAR(model.mean_neighbors(), 30.0 / 9.0, 1e-12);
}

TEST(Sampling, ExpectedDailyUnitsMatchesSimulation) {
    auto rng = make_rng(7);
    const auto p = DegreeParams::defaults();
    const std::vector<int> friends(20000, 6);
    const auto real = sample_break_lunch_degrees(p, friends, rng);
    const auto bl = real.break_lunch_units();
    const double mean = std::accumulate(bl.begin(), bl.end(), 0.0) / bl.size();
    const ClassNeighborModel classes;
    const double class_units = classes.classes_per_day * classes.mean_neighbors() * kUnitsPerClass;
    EXPECT_NEAR(mean + class_units, p.expected_daily_units(6, classes), 0.6);
}
