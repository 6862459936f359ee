#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace schoolnet {

/// One dyad of a weighted undirected graph, stored with i < j.
struct WeightedEdge {
    int i = 0;
    int j = 0;
    int weight = 0;
    friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// Simple undirected graph of friendships.
class FriendshipNetwork {
  public:
    FriendshipNetwork() = default;
    /// Throws std::invalid_argument on self-edges, duplicates, or out-of-range nodes.
    FriendshipNetwork(int n, std::vector<std::pair<int, int>> edges);

    int n() const noexcept { return n_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    /// Sorted pairs with first < second.
    std::span<const std::pair<int, int>> edges() const noexcept { return edges_; }
    std::span<const int> friends(int i) const noexcept;
    int degree(int i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
    std::vector<int> degrees() const;
    bool are_friends(int i, int j) const noexcept;
    double mean_degree() const noexcept { return n_ > 0 ? 2.0 * edges_.size() / n_ : 0.0; }

    /// Subgraph on `nodes`, relabeled 0..nodes.size()-1 in the given order.
    FriendshipNetwork induced(std::span<const int> nodes) const;

    friend bool operator==(const FriendshipNetwork& a, const FriendshipNetwork& b) {
        return a.n_ == b.n_ && a.edges_ == b.edges_;
    }

  private:
    int n_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<int> offsets_{0};
    std::vector<int> adjacency_;
};

void write_friendship(std::ostream& out, const FriendshipNetwork& g);
/// Reads `i j` pairs (one per line, `#` comments allowed); n is the node count.
FriendshipNetwork read_friendship(std::istream& in, int n);

/// Sparse symmetric multigraph under construction: dyad -> multiplicity.
class MultiLayer {
  public:
    struct Partner {
        int node;
        int units;
    };

    MultiLayer() = default;
    explicit MultiLayer(int n) : n_(n), partners_(static_cast<std::size_t>(n)) {}

    int n() const noexcept { return n_; }
    int multiplicity(int i, int j) const noexcept;
    /// Adds `units` to dyad (i, j); i != j.
    void add(int i, int j, int units = 1);
    /// Removes one unit from dyad (i, j); throws std::logic_error if it has none.
    void remove(int i, int j);
    std::span<const Partner> partners(int i) const noexcept { return partners_[static_cast<std::size_t>(i)]; }
    int row_sum(int i) const noexcept;
    std::int64_t total_units() const noexcept { return total_units_; }
    std::size_t dyad_count() const noexcept;
    /// Dyads sorted by (i, j), i < j.
    std::vector<WeightedEdge> entries() const;
    int max_multiplicity() const noexcept;

    friend bool operator==(const MultiLayer& a, const MultiLayer& b) {
        return a.n_ == b.n_ && a.entries() == b.entries();
    }

  private:
    int n_ = 0;
    std::vector<std::vector<Partner>> partners_;
    std::int64_t total_units_ = 0;
};

/// `i j multiplicity` lines sorted by (i, j).
void write_edge_list(std::ostream& out, const MultiLayer& layer);
MultiLayer read_edge_list(std::istream& in, int n);

/// Immutable symmetric daily contact matrix Y in compressed rows; Y_ij counts
/// ten-minute contacts, zero diagonal.
class ContactNetwork {
  public:
    struct Contact {
        int node;
        std::uint8_t units;
    };

    ContactNetwork() = default;
    explicit ContactNetwork(int n) : n_(n), offsets_(static_cast<std::size_t>(n) + 1, 0) {}
    /// Entries must have i < j and positive weights; duplicates are summed.
    ContactNetwork(int n, std::vector<WeightedEdge> entries);
    static ContactNetwork from_layer(const MultiLayer& layer, int scale = 1);

    int n() const noexcept { return n_; }
    std::span<const Contact> contacts(int i) const noexcept {
        return {contacts_.data() + offsets_[static_cast<std::size_t>(i)],
                contacts_.data() + offsets_[static_cast<std::size_t>(i) + 1]};
    }
    int units(int i, int j) const noexcept;
    int row_sum(int i) const noexcept;
    std::int64_t total_units() const noexcept { return total_units_; }
    std::size_t dyad_count() const noexcept { return contacts_.size() / 2; }
    std::vector<WeightedEdge> entries() const;

    friend bool operator==(const ContactNetwork& a, const ContactNetwork& b) {
        return a.n_ == b.n_ && a.offsets_ == b.offsets_ && a.entries() == b.entries();
    }

  private:
    int n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<Contact> contacts_;
    std::int64_t total_units_ = 0;
};

/// Header `day n total_units` followed by the sorted edge list.
void write_contact_network(std::ostream& out, const ContactNetwork& net, int day);

}  // namespace schoolnet
