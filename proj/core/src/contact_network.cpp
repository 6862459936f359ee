#include "schoolnet/contact_network.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace schoolnet {

MultiLayer build_break_lunch_layer(const FriendshipNetwork& friendship, std::span<const int> units,
                                   double friend_fraction, Rng& rng, int max_restarts) {
    const auto c = MatchConstraints::make(units, friend_fraction, kBreakLunchMaxMultiplicity);
    return match_stubs(units, friendship, c, rng, max_restarts);
}

MultiLayer build_class_neighbors(const FriendshipNetwork& friendship, const Roster& roster,
                                 const ClassNeighborModel& model, Rng& rng, int max_redraws) {
    const int n = static_cast<int>(roster.size());
    if (friendship.n() != n) throw std::invalid_argument("friendship and roster sizes differ");
    MultiLayer out(n);
    for (const auto& members : roster.by_grade()) {
        const int size = static_cast<int>(members.size());
        if (size < 2) continue;
        const auto sub = friendship.induced(members);
        const auto capacity = static_cast<std::int64_t>(kMaxSharedClasses) * static_cast<std::int64_t>(sub.edge_count());
        bool done = false;
        for (int attempt = 0; attempt <= max_redraws && !done; ++attempt) {
            const auto draws = sample_class_neighbor_degrees(model, size, rng);
            std::vector<int> degrees(static_cast<std::size_t>(size), 0);
            for (int k = 0; k < size; ++k)
                for (int c : draws[static_cast<std::size_t>(k)]) degrees[static_cast<std::size_t>(k)] += std::min(c, size - 1);
            auto constraints = MatchConstraints::make(degrees, kClassFriendFraction, kMaxSharedClasses);
            constraints.target_friend_units = std::min(constraints.target_friend_units, capacity);
            if (!check_feasibility(degrees, sub, 0.0, kMaxSharedClasses).empty()) continue;
            try {
                const auto layer = match_stubs(degrees, sub, constraints, rng);
                for (const auto& e : layer.entries())
                    out.add(members[static_cast<std::size_t>(e.i)], members[static_cast<std::size_t>(e.j)], e.weight);
                done = true;
            } catch (const MatchError&) {
            }
        }
        if (!done)
            throw std::runtime_error("class layer for grade " + std::to_string(roster[static_cast<std::size_t>(members[0])].grade) +
                                     " infeasible after " + std::to_string(max_redraws) + " redraws");
    }
    return out;
}

ContactNetwork build_class_layer(const FriendshipNetwork& friendship, const Roster& roster,
                                 const ClassNeighborModel& model, Rng& rng, int max_redraws) {
    return ContactNetwork::from_layer(build_class_neighbors(friendship, roster, model, rng, max_redraws), kUnitsPerClass);
}

namespace {

ContactNetwork clamp_entries(int n, std::vector<WeightedEdge> entries, std::int64_t* clamped) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
    std::vector<WeightedEdge> merged;
    merged.reserve(entries.size());
    for (const auto& e : entries) {
        if (!merged.empty() && merged.back().i == e.i && merged.back().j == e.j)
            merged.back().weight += e.weight;
        else
            merged.push_back(e);
    }
    std::int64_t hits = 0;
    for (auto& e : merged)
        if (e.weight > kMaxDailyUnits) {
            e.weight = kMaxDailyUnits;
            ++hits;
        }
    if (clamped) *clamped += hits;
    return ContactNetwork(n, std::move(merged));
}

}  // namespace

ContactNetwork compose_day(const MultiLayer& break_lunch, const ContactNetwork& class_layer, std::int64_t* clamped) {
    if (break_lunch.n() != class_layer.n()) throw std::invalid_argument("layer sizes differ");
    auto entries = break_lunch.entries();
    auto cls = class_layer.entries();
    entries.insert(entries.end(), cls.begin(), cls.end());
    return clamp_entries(class_layer.n(), std::move(entries), clamped);
}

ContactNetwork friendship_only_network(const FriendshipNetwork& friendship, std::int64_t target_total_units, Rng& rng,
                                       std::int64_t* clamped) {
    const auto edges = friendship.edges();
    if (edges.empty()) throw std::invalid_argument("friendship-only network needs at least one friendship");
    if (target_total_units < 0) throw std::invalid_argument("negative target units");
    const auto count = static_cast<std::int64_t>(edges.size());
    const std::int64_t base = target_total_units / count;
    const std::int64_t extra = target_total_units % count;
    // The first `extra` slots of a partial shuffle get one more unit.
    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::int64_t k = 0; k < extra; ++k) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), order.size() - 1);
        std::swap(order[static_cast<std::size_t>(k)], order[pick(rng)]);
    }
    std::vector<std::int64_t> units(edges.size(), base);
    for (std::int64_t k = 0; k < extra; ++k) ++units[order[static_cast<std::size_t>(k)]];
    std::vector<WeightedEdge> entries;
    std::int64_t hits = 0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (units[k] == 0) continue;
        if (units[k] > kMaxDailyUnits) ++hits;
        entries.push_back({edges[k].first, edges[k].second, static_cast<int>(std::min<std::int64_t>(units[k], kMaxDailyUnits))});
    }
    if (clamped) *clamped += hits;
    return ContactNetwork(friendship.n(), std::move(entries));
}

double RandomMixingParams::mean_duration() const {
    double total = 0.0, mass = 0.0;
    for (auto [units, p] : durations) {
        total += units * p;
        mass += p;
    }
    return mass > 0.0 ? total / mass : 0.0;
}

ContactNetwork random_mixing_day(int n, const RandomMixingParams& params, Rng& rng) {
    if (n <= params.mean_partners) throw std::invalid_argument("random mixing needs n > mean partners");
    if (params.durations.empty()) throw std::invalid_argument("empty duration distribution");
    std::vector<double> weights;
    for (auto [units, p] : params.durations) {
        if (units < 1 || units > kMaxDailyUnits) throw std::invalid_argument("duration outside 1..38 units");
        weights.push_back(p);
    }
    std::poisson_distribution<int> partners(params.mean_partners);
    std::discrete_distribution<std::size_t> duration(weights.begin(), weights.end());
    const FriendshipNetwork nobody(n, {});
    std::vector<int> degrees(static_cast<std::size_t>(n));
    for (int attempt = 0;; ++attempt) {
        for (auto& d : degrees) d = std::min(partners(rng), n - 1);
        const std::int64_t sum = std::accumulate(degrees.begin(), degrees.end(), std::int64_t{0});
        if (sum % 2 != 0) {
            // Parity fix: one more partner for a random student with room.
            std::uniform_int_distribution<int> pick(0, n - 1);
            int i = pick(rng);
            while (degrees[static_cast<std::size_t>(i)] >= n - 1) i = pick(rng);
            ++degrees[static_cast<std::size_t>(i)];
        }
        try {
            const auto layer = match_stubs(degrees, nobody, MatchConstraints::make(degrees, 0.0, 1), rng);
            auto entries = layer.entries();
            for (auto& e : entries) e.weight = params.durations[duration(rng)].first;
            return ContactNetwork(n, std::move(entries));
        } catch (const std::exception&) {
            if (attempt >= 50) throw;
        }
    }
}

}  // namespace schoolnet
