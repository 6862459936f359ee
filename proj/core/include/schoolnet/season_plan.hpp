#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string_view>
#include <vector>

#include "schoolnet/contact_network.hpp"
#include "schoolnet/degree_model.hpp"
#include "schoolnet/graph.hpp"
#include "schoolnet/population.hpp"

namespace schoolnet {

enum class Variant { static_network, dynamic_network, friendship_only, random_mixing };

std::string_view to_string(Variant v);
/// Accepts "static", "dynamic", "friendship_only", "random_mixing".
Variant parse_variant(std::string_view s);

/// Read-only day -> contact network map, safe for concurrent callers.
class DayNetworkSource {
  public:
    virtual ~DayNetworkSource() = default;
    virtual int n() const = 0;
    virtual std::shared_ptr<const ContactNetwork> network(int day) const = 0;
};

/// Contact parameters of one bootstrap replicate.
struct PlanParameters {
    DegreeParams degrees;
    /// X: mean fraction of break and lunch contacts made with friends.
    double friend_fraction = 0.68;
};

/// Resamples the survey (when `resample`) and refits the break and lunch
/// models and X on the result.
PlanParameters estimate_plan_parameters(const SurveySample& survey, Rng& rng, bool resample = true, int lunch_cutoff = 30);

struct PlanOptions {
    Variant variant = Variant::static_network;
    /// Days after this wrap around.
    int season_length = 200;
    ClassNeighborModel class_model;
    RandomMixingParams random_mixing;
    /// Fresh degree draws allowed when a layer cannot be matched.
    int max_redraws = 50;
};

class SeasonPlan final : public DayNetworkSource {
  public:
    /// Builds the fixed parts (class layer, static day) eagerly; other days
    /// are generated on first use from (seed, day) alone.
    SeasonPlan(const Roster& roster, const FriendshipNetwork& friendship, PlanParameters params, PlanOptions options,
               std::uint64_t seed);

    int n() const override { return n_; }
    std::shared_ptr<const ContactNetwork> network(int day) const override;

    Variant variant() const noexcept { return options_.variant; }
    const PlanParameters& parameters() const noexcept { return params_; }
    int season_length() const noexcept { return options_.season_length; }

    /// Class contacts; empty for friendship-only and random mixing.
    const ContactNetwork& class_layer() const noexcept { return *class_layer_; }
    /// Break/lunch layer for a day (static plans use day 0). Regenerated
    /// deterministically; only defined for the static and dynamic variants.
    MultiLayer break_lunch_layer(int day) const;

    /// Dyads clamped at 38 units so far.
    std::int64_t clamped_dyads() const noexcept { return clamped_.load(); }
    /// Expected total daily units; the friendship-only calibration target.
    std::int64_t target_total_units() const noexcept { return target_total_units_; }

  private:
    std::shared_ptr<const ContactNetwork> build_day(int slot) const;

    int n_;
    FriendshipNetwork friendship_;
    std::vector<int> friend_counts_;
    PlanParameters params_;
    PlanOptions options_;
    std::uint64_t seed_;
    std::int64_t target_total_units_ = 0;
    std::shared_ptr<const ContactNetwork> class_layer_;
    std::shared_ptr<const ContactNetwork> fixed_day_;
    mutable std::vector<std::shared_ptr<const ContactNetwork>> days_;
    mutable std::unique_ptr<std::once_flag[]> once_;
    mutable std::atomic<std::int64_t> clamped_{0};
};

/// Bootstrap-refit parameters followed by plan construction; the seed covers both.
std::shared_ptr<const SeasonPlan> make_season_plan(const SurveySample& survey, const Roster& roster,
                                                   const FriendshipNetwork& friendship, const PlanOptions& options,
                                                   std::uint64_t seed);

}  // namespace schoolnet
