#include "schoolnet/stub_matcher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace schoolnet {

namespace {

/// Fenwick tree over nonnegative integer weights with prefix-sum search.
class WeightTree {
  public:
    explicit WeightTree(std::size_t n) : tree_(n + 1, 0), value_(n, 0) {
        top_ = 1;
        while (top_ * 2 <= n) top_ *= 2;
    }

    void set(std::size_t i, std::int64_t v) {
        const std::int64_t delta = v - value_[i];
        if (delta == 0) return;
        value_[i] = v;
        total_ += delta;
        for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
    }

    std::int64_t get(std::size_t i) const { return value_[i]; }
    std::int64_t total() const { return total_; }

    /// Index whose cumulative interval contains `u`, for u in [0, total).
    std::size_t find(std::int64_t u) const {
        std::size_t pos = 0;
        for (std::size_t step = top_; step > 0; step >>= 1) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && tree_[next] <= u) {
                pos = next;
                u -= tree_[next];
            }
        }
        return pos;
    }

    std::size_t sample(Rng& rng) const {
        return find(std::uniform_int_distribution<std::int64_t>(0, total_ - 1)(rng));
    }

  private:
    std::vector<std::int64_t> tree_;
    std::vector<std::int64_t> value_;
    std::int64_t total_ = 0;
    std::size_t top_ = 1;
};

std::vector<FeasibilityViolation> check(std::span<const int> degrees, const FriendshipNetwork& friendships,
                                        std::int64_t target, int m) {
    std::vector<FeasibilityViolation> out;
    if (static_cast<int>(degrees.size()) != friendships.n()) {
        out.push_back(FeasibilityViolation::size_mismatch);
        return out;
    }
    if (std::any_of(degrees.begin(), degrees.end(), [](int d) { return d < 0; })) {
        out.push_back(FeasibilityViolation::negative_degree);
        return out;
    }
    const std::int64_t sum = std::accumulate(degrees.begin(), degrees.end(), std::int64_t{0});
    if (sum % 2 != 0) out.push_back(FeasibilityViolation::odd_degree_sum);
    if (static_cast<std::int64_t>(m) * static_cast<std::int64_t>(friendships.edge_count()) < target)
        out.push_back(FeasibilityViolation::insufficient_friend_capacity);
    if (!degrees.empty()) {
        const int dmax = *std::max_element(degrees.begin(), degrees.end());
        std::int64_t capacity = 0;
        for (int d : degrees)
            if (d <= dmax) capacity += std::min(m, d);
        if (dmax > capacity) out.push_back(FeasibilityViolation::degree_exceeds_partner_capacity);
    }
    return out;
}

class Attempt {
  public:
    Attempt(std::span<const int> degrees, const FriendshipNetwork& friendships, const MatchConstraints& c, Rng& rng)
        : n_(degrees.size()),
          friends_(friendships),
          m_(c.max_multiplicity),
          rng_(rng),
          layer_(static_cast<int>(degrees.size())),
          residual_(degrees.begin(), degrees.end()),
          all_(degrees.size()) {
        for (std::size_t i = 0; i < n_; ++i) all_.set(i, residual_[i]);
        kicks_left_ = 10 * static_cast<std::int64_t>(n_) + 50;
        repair_budget_ = 20 * all_.total() + 10'000;
    }

    std::optional<MultiLayer> run(std::int64_t target) {
        if (!friend_phase(target)) return std::nullopt;
        if (!nonfriend_phase()) return std::nullopt;
        return std::move(layer_);
    }

  private:
    void consume(int k) {
        auto& r = residual_[static_cast<std::size_t>(k)];
        --r;
        all_.set(static_cast<std::size_t>(k), r);
        if (phase_ && !blocked_[static_cast<std::size_t>(k)]) phase_->set(static_cast<std::size_t>(k), r);
    }

    void place(int i, int j) {
        layer_.add(i, j);
        consume(i);
        consume(j);
    }

    bool open_dyad(int i, int j, bool friend_kind) const {
        return i != j && friends_.are_friends(i, j) == friend_kind && layer_.multiplicity(i, j) < m_;
    }

    /// Unblocks every stub owner after the layer changed under a repair.
    void reopen(bool friend_phase) {
        blocked_.assign(n_, false);
        for (std::size_t k = 0; k < n_; ++k) {
            const bool usable = !friend_phase || friends_.degree(static_cast<int>(k)) > 0;
            blocked_[k] = !usable;
            phase_->set(k, usable ? residual_[k] : 0);
        }
    }

    /// Dead-end repair: moves one placed unit (a, b) of the current kind to
    /// (i, a) and (j, b), where i and j own free stubs (i == j allowed). Degrees
    /// of a and b are unchanged, so one more unit of this kind gets placed.
    bool repair(bool friend_kind) {
        std::vector<int> open;
        for (std::size_t k = 0; k < n_; ++k)
            if (residual_[k] > 0 && (!friend_kind || friends_.degree(static_cast<int>(k)) > 0)) open.push_back(static_cast<int>(k));
        std::vector<WeightedEdge> units;
        for (const auto& e : layer_.entries())
            if (friends_.are_friends(e.i, e.j) == friend_kind) units.push_back(e);
        std::shuffle(open.begin(), open.end(), rng_);
        std::shuffle(units.begin(), units.end(), rng_);
        for (int i : open)
            for (int j : open) {
                if (j == i && residual_[static_cast<std::size_t>(i)] < 2) continue;
                for (const auto& e : units) {
                    if (--repair_budget_ < 0) return false;
                    for (auto [a, b] : {std::pair{e.i, e.j}, std::pair{e.j, e.i}}) {
                        if (a == i || b == j) continue;
                        layer_.remove(a, b);
                        if (open_dyad(i, a, friend_kind)) {
                            layer_.add(i, a);
                            if (open_dyad(j, b, friend_kind)) {
                                layer_.add(j, b);
                                consume(i);
                                consume(j);
                                return true;
                            }
                            layer_.remove(i, a);
                        }
                        layer_.add(a, b);
                    }
                }
            }
        return false;
    }

    bool friend_phase(std::int64_t target) {
        WeightTree stubs(n_);
        blocked_.assign(n_, false);
        for (std::size_t i = 0; i < n_; ++i)
            if (friends_.degree(static_cast<int>(i)) > 0) stubs.set(i, residual_[i]);
            else blocked_[i] = true;
        phase_ = &stubs;
        std::vector<std::pair<int, int>> eligible;
        for (std::int64_t placed = 0; placed < target;) {
            if (stubs.total() == 0) {
                if (repair(true))
                    ++placed;
                else if (!kick(true))
                    return false;
                reopen(true);
                continue;
            }
            const int i = static_cast<int>(stubs.sample(rng_));
            eligible.clear();
            std::int64_t weight = 0;
            for (int j : friends_.friends(i)) {
                const int r = residual_[static_cast<std::size_t>(j)];
                if (r > 0 && layer_.multiplicity(i, j) < m_) {
                    eligible.emplace_back(j, r);
                    weight += r;
                }
            }
            if (eligible.empty()) {
                blocked_[static_cast<std::size_t>(i)] = true;
                stubs.set(static_cast<std::size_t>(i), 0);
                continue;
            }
            std::int64_t u = std::uniform_int_distribution<std::int64_t>(0, weight - 1)(rng_);
            int j = eligible.back().first;
            for (auto [node, r] : eligible) {
                if (u < r) {
                    j = node;
                    break;
                }
                u -= r;
            }
            place(i, j);
            ++placed;
        }
        phase_ = nullptr;
        return true;
    }

    bool eligible_nonfriend(int i, int j) const {
        return j != i && !friends_.are_friends(i, j) && layer_.multiplicity(i, j) < m_;
    }

    bool nonfriend_phase() {
        WeightTree stubs(n_);
        blocked_.assign(n_, false);
        for (std::size_t i = 0; i < n_; ++i) stubs.set(i, residual_[i]);
        phase_ = &stubs;
        while (all_.total() > 0) {
            if (stubs.total() == 0) {
                if (!repair(false) && !kick(false)) return false;
                reopen(false);
                continue;
            }
            const int i = static_cast<int>(stubs.sample(rng_));
            // Residual weight of partners that are ineligible for i.
            std::int64_t excluded = residual_[static_cast<std::size_t>(i)];
            for (int j : friends_.friends(i)) excluded += residual_[static_cast<std::size_t>(j)];
            for (const auto& p : layer_.partners(i))
                if (p.units >= m_ && !friends_.are_friends(i, p.node)) excluded += residual_[static_cast<std::size_t>(p.node)];
            const std::int64_t weight = all_.total() - excluded;
            if (weight <= 0) {
                blocked_[static_cast<std::size_t>(i)] = true;
                stubs.set(static_cast<std::size_t>(i), 0);
                continue;
            }
            int j = -1;
            for (int tries = 0; tries < 64 && j < 0; ++tries) {
                const int cand = static_cast<int>(all_.sample(rng_));
                if (eligible_nonfriend(i, cand)) j = cand;
            }
            if (j < 0) j = scan_partner(i, weight);
            place(i, j);
        }
        phase_ = nullptr;
        return true;
    }

    /// Exact draw over all eligible partners; used when rejection keeps failing.
    int scan_partner(int i, std::int64_t weight) {
        std::int64_t u = std::uniform_int_distribution<std::int64_t>(0, weight - 1)(rng_);
        int last = -1;
        for (std::size_t k = 0; k < n_; ++k) {
            const int r = residual_[k];
            if (r == 0 || !eligible_nonfriend(i, static_cast<int>(k))) continue;
            last = static_cast<int>(k);
            if (u < r) return last;
            u -= r;
        }
        return last;
    }

    /// Random alternating-path step when no swap exists: a stuck owner i takes
    /// over one unit (a, b) as (i, a), freeing a stub of b. Both dyads are of the
    /// same kind, so the friend-unit count is unchanged; with `friend_kind` set
    /// only friend dyads are used, otherwise either kind.
    bool kick(bool friend_kind) {
        if (kicks_left_-- <= 0) return false;
        std::vector<int> stuck;
        for (std::size_t k = 0; k < n_; ++k)
            if (residual_[k] > 0 && (!friend_kind || friends_.degree(static_cast<int>(k)) > 0)) stuck.push_back(static_cast<int>(k));
        std::shuffle(stuck.begin(), stuck.end(), rng_);
        std::vector<std::pair<int, int>> moves;
        for (int i : stuck) {
            for (std::size_t a = 0; a < n_; ++a) {
                const int ai = static_cast<int>(a);
                if (ai == i || layer_.multiplicity(i, ai) >= m_) continue;
                const bool kind = friends_.are_friends(i, ai);
                if (friend_kind && !kind) continue;
                for (const auto& p : layer_.partners(ai))
                    if (p.node != i && friends_.are_friends(ai, p.node) == kind) moves.emplace_back(ai, p.node);
            }
            if (moves.empty()) continue;
            const auto [a, b] = moves[std::uniform_int_distribution<std::size_t>(0, moves.size() - 1)(rng_)];
            layer_.remove(a, b);
            layer_.add(i, a);
            consume(i);
            auto& r = residual_[static_cast<std::size_t>(b)];
            ++r;
            all_.set(static_cast<std::size_t>(b), r);
            return true;
        }
        return false;
    }

    std::size_t n_;
    const FriendshipNetwork& friends_;
    int m_;
    Rng& rng_;
    MultiLayer layer_;
    std::vector<int> residual_;
    WeightTree all_;
    WeightTree* phase_ = nullptr;
    std::vector<bool> blocked_;
    std::int64_t kicks_left_ = 0;
    std::int64_t repair_budget_ = 0;
};

}  // namespace

MatchConstraints MatchConstraints::make(std::span<const int> degrees, double friend_fraction, int max_multiplicity) {
    const std::int64_t sum = std::accumulate(degrees.begin(), degrees.end(), std::int64_t{0});
    MatchConstraints c;
    c.friend_fraction = friend_fraction;
    c.max_multiplicity = max_multiplicity;
    c.target_friend_units = static_cast<std::int64_t>(std::round(friend_fraction * static_cast<double>(sum) / 2.0));
    return c;
}

std::string to_string(FeasibilityViolation v) {
    switch (v) {
        case FeasibilityViolation::size_mismatch: return "degree vector does not match friendship node count";
        case FeasibilityViolation::negative_degree: return "negative degree";
        case FeasibilityViolation::odd_degree_sum: return "sum of degrees is odd";
        case FeasibilityViolation::insufficient_friend_capacity: return "m * friendships < target friend units";
        case FeasibilityViolation::degree_exceeds_partner_capacity: return "max degree exceeds partner capacity";
    }
    return "unknown";
}

std::vector<FeasibilityViolation> check_feasibility(std::span<const int> degrees, const FriendshipNetwork& friendships,
                                                    double friend_fraction, int max_multiplicity) {
    const auto c = MatchConstraints::make(degrees, friend_fraction, max_multiplicity);
    return check(degrees, friendships, c.target_friend_units, max_multiplicity);
}

MultiLayer match_stubs(std::span<const int> degrees, const FriendshipNetwork& friendships,
                       const MatchConstraints& constraints, Rng& rng, int max_restarts) {
    if (constraints.max_multiplicity < 1) throw std::invalid_argument("max multiplicity must be positive");
    auto violations = check(degrees, friendships, constraints.target_friend_units, constraints.max_multiplicity);
    if (!violations.empty()) throw std::invalid_argument("infeasible matching: " + to_string(violations.front()));
    for (int attempt = 0; attempt <= max_restarts; ++attempt) {
        Attempt a(degrees, friendships, constraints, rng);
        if (auto layer = a.run(constraints.target_friend_units)) return std::move(*layer);
    }
    throw MatchError("stub matching reached a dead end after " + std::to_string(max_restarts) + " restarts",
                     max_restarts);
}

std::vector<std::int64_t> multiplicity_histogram(const MultiLayer& layer, int max_multiplicity) {
    std::vector<std::int64_t> hist(static_cast<std::size_t>(std::max(max_multiplicity, layer.max_multiplicity())) + 1, 0);
    for (const auto& e : layer.entries()) ++hist[static_cast<std::size_t>(e.weight)];
    return hist;
}

std::int64_t friend_units(const MultiLayer& layer, const FriendshipNetwork& friendships) {
    std::int64_t total = 0;
    for (const auto& e : layer.entries())
        if (friendships.are_friends(e.i, e.j)) total += e.weight;
    return total;
}

}  // namespace schoolnet
