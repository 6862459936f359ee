#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "schoolnet/degree_model.hpp"
#include "schoolnet/graph.hpp"
#include "schoolnet/population.hpp"
#include "schoolnet/rng.hpp"
#include "schoolnet/stub_matcher.hpp"

namespace schoolnet {

/// Ten-minute periods in a school day.
inline constexpr int kMaxDailyUnits = 38;
/// 100 minutes of breaks plus lunch.
inline constexpr int kBreakLunchMaxMultiplicity = 10;
inline constexpr int kMaxSharedClasses = 7;
inline constexpr double kClassFriendFraction = 0.5;

/// Break and lunch units wired so a fraction `friend_fraction` of them fall on friend dyads.
MultiLayer build_break_lunch_layer(const FriendshipNetwork& friendship, std::span<const int> units,
                                   double friend_fraction, Rng& rng, int max_restarts = kDefaultMaxRestarts);

/// Shared-class counts Y_neighbors: each grade matched separately on its
/// students' class-neighbor degrees, half of the units to friends, at most
/// 7 shared classes per pair. Per-class draws are clipped to the number of
/// grade mates; the friend target is clipped to what the grade's friendships
/// can hold. Infeasible or dead-end draws are redrawn up to `max_redraws` times.
MultiLayer build_class_neighbors(const FriendshipNetwork& friendship, const Roster& roster,
                                 const ClassNeighborModel& model, Rng& rng, int max_redraws = 50);

/// 4 * Y_neighbors.
ContactNetwork build_class_layer(const FriendshipNetwork& friendship, const Roster& roster,
                                 const ClassNeighborModel& model, Rng& rng, int max_redraws = 50);

/// Entrywise sum clamped at 38; `clamped` counts dyads that hit the clamp.
ContactNetwork compose_day(const MultiLayer& break_lunch, const ContactNetwork& class_layer,
                           std::int64_t* clamped = nullptr);

/// Units spread as evenly as possible over friendship edges, the remainder
/// going to a random subset; entries are clamped at 38.
ContactNetwork friendship_only_network(const FriendshipNetwork& friendship, std::int64_t target_total_units, Rng& rng,
                                       std::int64_t* clamped = nullptr);

struct RandomMixingParams {
    double mean_partners = 36.0;
    /// Duration pmf over ten-minute units.
    std::vector<std::pair<int, double>> durations{{4, 0.9}, {5, 0.1}};

    double mean_duration() const;
};

/// One day of random mixing: Poisson partner counts matched uniformly into a
/// simple graph, each partnership with an independent duration.
ContactNetwork random_mixing_day(int n, const RandomMixingParams& params, Rng& rng);

}  // namespace schoolnet
