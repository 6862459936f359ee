#include "schoolnet/season_plan.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace schoolnet {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::static_network: return "static";
        case Variant::dynamic_network: return "dynamic";
        case Variant::friendship_only: return "friendship_only";
        case Variant::random_mixing: return "random_mixing";
    }
    return "unknown";
}

Variant parse_variant(std::string_view s) {
    if (s == "static") return Variant::static_network;
    if (s == "dynamic") return Variant::dynamic_network;
    if (s == "friendship_only") return Variant::friendship_only;
    if (s == "random_mixing") return Variant::random_mixing;
    throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

PlanParameters estimate_plan_parameters(const SurveySample& survey, Rng& rng, bool resample, int lunch_cutoff) {
    if (survey.empty()) throw std::invalid_argument("empty survey");
    const SurveySample sample = resample ? bootstrap_resample(survey, rng) : survey;
    PlanParameters p;
    p.degrees.break_fit = fit_break_model(sample);
    p.degrees.lunch_fit = fit_lunch_model(sample, lunch_cutoff);
    p.friend_fraction = *sample.mean_pct_to_friends();
    return p;
}

SeasonPlan::SeasonPlan(const Roster& roster, const FriendshipNetwork& friendship, PlanParameters params,
                       PlanOptions options, std::uint64_t seed)
    : n_(static_cast<int>(roster.size())),
      friendship_(friendship),
      friend_counts_(friendship.degrees()),
      params_(params),
      options_(std::move(options)),
      seed_(seed) {
    if (friendship.n() != n_) throw std::invalid_argument("friendship and roster sizes differ");
    if (options_.season_length < 1) throw std::invalid_argument("season length must be positive");
    double expected = 0.0;
    for (int f : friend_counts_) expected += params_.degrees.expected_daily_units(f, options_.class_model);
    target_total_units_ = std::llround(expected / 2.0);

    class_layer_ = std::make_shared<const ContactNetwork>(n_);
    switch (options_.variant) {
        case Variant::static_network:
        case Variant::dynamic_network: {
            auto rng = make_rng(seed_, {stream::class_layer});
            class_layer_ = std::make_shared<const ContactNetwork>(
                build_class_layer(friendship_, roster, options_.class_model, rng, options_.max_redraws));
            break;
        }
        case Variant::friendship_only: {
            auto rng = make_rng(seed_, {stream::day, 0});
            std::int64_t clamped = 0;
            fixed_day_ = std::make_shared<const ContactNetwork>(
                friendship_only_network(friendship_, target_total_units_, rng, &clamped));
            clamped_ += clamped;
            break;
        }
        case Variant::random_mixing: break;
    }
    if (options_.variant == Variant::static_network) fixed_day_ = build_day(0);
    if (!fixed_day_) {
        days_.resize(static_cast<std::size_t>(options_.season_length));
        once_ = std::make_unique<std::once_flag[]>(static_cast<std::size_t>(options_.season_length));
    }
}

MultiLayer SeasonPlan::break_lunch_layer(int day) const {
    if (options_.variant != Variant::static_network && options_.variant != Variant::dynamic_network)
        throw std::logic_error("variant has no break/lunch layer");
    const int slot = options_.variant == Variant::static_network ? 0 : day % options_.season_length;
    auto rng = make_rng(seed_, {stream::day, static_cast<std::uint64_t>(slot)});
    for (int attempt = 0; attempt <= options_.max_redraws; ++attempt) {
        const auto units = sample_break_lunch_degrees(params_.degrees, friend_counts_, rng).break_lunch_units();
        if (!check_feasibility(units, friendship_, params_.friend_fraction, kBreakLunchMaxMultiplicity).empty()) continue;
        try {
            return build_break_lunch_layer(friendship_, units, params_.friend_fraction, rng);
        } catch (const MatchError&) {
        }
    }
    throw std::runtime_error("break/lunch layer for day " + std::to_string(day) + " infeasible after " +
                             std::to_string(options_.max_redraws) + " redraws");
}

std::shared_ptr<const ContactNetwork> SeasonPlan::build_day(int slot) const {
    if (options_.variant == Variant::random_mixing) {
        auto rng = make_rng(seed_, {stream::day, static_cast<std::uint64_t>(slot)});
        return std::make_shared<const ContactNetwork>(random_mixing_day(n_, options_.random_mixing, rng));
    }
    std::int64_t clamped = 0;
    auto net = std::make_shared<const ContactNetwork>(compose_day(break_lunch_layer(slot), *class_layer_, &clamped));
    clamped_ += clamped;
    return net;
}

std::shared_ptr<const ContactNetwork> SeasonPlan::network(int day) const {
    if (day < 0) throw std::invalid_argument("negative day");
    if (fixed_day_) return fixed_day_;
    const auto slot = static_cast<std::size_t>(day % options_.season_length);
    std::call_once(once_[slot], [&] { days_[slot] = build_day(static_cast<int>(slot)); });
    return days_[slot];
}

std::shared_ptr<const SeasonPlan> make_season_plan(const SurveySample& survey, const Roster& roster,
                                                   const FriendshipNetwork& friendship, const PlanOptions& options,
                                                   std::uint64_t seed) {
    auto rng = make_rng(seed, {stream::bootstrap});
    auto params = estimate_plan_parameters(survey, rng);
    return std::make_shared<const SeasonPlan>(roster, friendship, params, options, derive_seed(seed, {stream::plan}));
}

}  // namespace schoolnet
