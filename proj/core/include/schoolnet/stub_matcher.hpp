#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "schoolnet/graph.hpp"
#include "schoolnet/rng.hpp"

namespace schoolnet {

/// Friend-fraction and multiplicity constraints for one matching.
struct MatchConstraints {
    double friend_fraction = 0.0;
    int max_multiplicity = 1;
    /// Exact number of units to place on friend dyads.
    std::int64_t target_friend_units = 0;

    /// target = round(p * sum(d) / 2), half away from zero.
    static MatchConstraints make(std::span<const int> degrees, double friend_fraction, int max_multiplicity);
};

enum class FeasibilityViolation {
    size_mismatch,
    negative_degree,
    odd_degree_sum,
    insufficient_friend_capacity,
    degree_exceeds_partner_capacity,
};

std::string to_string(FeasibilityViolation v);

/// Checks (a) even degree sum, (b) m * |friendships| >= T, and
/// (c) max(d) <= sum over {i : d_i <= max(d)} of min(m, d_i).
std::vector<FeasibilityViolation> check_feasibility(std::span<const int> degrees, const FriendshipNetwork& friendships,
                                                    double friend_fraction, int max_multiplicity);

/// The matcher hit a dead end on every attempt.
class MatchError : public std::runtime_error {
  public:
    MatchError(const std::string& what, int restarts) : std::runtime_error(what), restarts_(restarts) {}
    int restarts() const noexcept { return restarts_; }

  private:
    int restarts_;
};

inline constexpr int kDefaultMaxRestarts = 100;

/// Sequential stub matching with a friend-unit quota and a per-dyad cap.
///
/// Phase 1 places exactly T units on friend dyads: a stub is drawn uniformly,
/// and its owner's friends with spare degree and multiplicity below the cap
/// are chosen with probability proportional to their residual degree. Phase 2
/// wires the remaining stubs the same way over non-friend dyads only. A stub
/// whose owner has no eligible partner goes back to the pool. When no stub can
/// be placed, a swap moves an existing unit (a, b) of the same kind to (i, a)
/// and (j, b) for stuck owners i and j; if no swap exists the whole layer is
/// restarted.
///
/// Throws std::invalid_argument if the inputs fail `check_feasibility`, and
/// MatchError after `max_restarts` failed restarts.
MultiLayer match_stubs(std::span<const int> degrees, const FriendshipNetwork& friendships,
                       const MatchConstraints& constraints, Rng& rng, int max_restarts = kDefaultMaxRestarts);

/// Counts of dyads by multiplicity; index k holds the number of dyads with
/// multiplicity k (index 0 unused). Size is max(m, largest multiplicity) + 1.
std::vector<std::int64_t> multiplicity_histogram(const MultiLayer& layer, int max_multiplicity = 0);

/// Units placed on friend dyads.
std::int64_t friend_units(const MultiLayer& layer, const FriendshipNetwork& friendships);

}  // namespace schoolnet
