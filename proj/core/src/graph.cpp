#include "schoolnet/graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

namespace schoolnet {

FriendshipNetwork::FriendshipNetwork(int n, std::vector<std::pair<int, int>> edges) : n_(n) {
    if (n < 0) throw std::invalid_argument("negative node count");
    for (auto& e : edges) {
        if (e.first == e.second) throw std::invalid_argument("self-friendship on node " + std::to_string(e.first));
        if (e.first < 0 || e.second < 0 || e.first >= n || e.second >= n)
            throw std::invalid_argument("friendship endpoint out of range");
        if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw std::invalid_argument("duplicate friendship");
    edges_ = std::move(edges);

    std::vector<int> deg(static_cast<std::size_t>(n), 0);
    for (auto [a, b] : edges_) {
        ++deg[static_cast<std::size_t>(a)];
        ++deg[static_cast<std::size_t>(b)];
    }
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) offsets_[static_cast<std::size_t>(i) + 1] = offsets_[static_cast<std::size_t>(i)] + deg[static_cast<std::size_t>(i)];
    adjacency_.resize(static_cast<std::size_t>(offsets_.back()));
    std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
    for (auto [a, b] : edges_) {
        adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(a)]++)] = b;
        adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(b)]++)] = a;
    }
    for (int i = 0; i < n; ++i)
        std::sort(adjacency_.begin() + offsets_[static_cast<std::size_t>(i)],
                  adjacency_.begin() + offsets_[static_cast<std::size_t>(i) + 1]);
}

std::span<const int> FriendshipNetwork::friends(int i) const noexcept {
    return {adjacency_.data() + offsets_[static_cast<std::size_t>(i)],
            adjacency_.data() + offsets_[static_cast<std::size_t>(i) + 1]};
}

std::vector<int> FriendshipNetwork::degrees() const {
    std::vector<int> out(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] = degree(i);
    return out;
}

bool FriendshipNetwork::are_friends(int i, int j) const noexcept {
    auto f = friends(i);
    return std::binary_search(f.begin(), f.end(), j);
}

FriendshipNetwork FriendshipNetwork::induced(std::span<const int> nodes) const {
    std::vector<int> local(static_cast<std::size_t>(n_), -1);
    for (std::size_t k = 0; k < nodes.size(); ++k) local[static_cast<std::size_t>(nodes[k])] = static_cast<int>(k);
    std::vector<std::pair<int, int>> sub;
    for (std::size_t k = 0; k < nodes.size(); ++k)
        for (int j : friends(nodes[k])) {
            const int lj = local[static_cast<std::size_t>(j)];
            if (lj > static_cast<int>(k)) sub.emplace_back(static_cast<int>(k), lj);
        }
    return FriendshipNetwork(static_cast<int>(nodes.size()), std::move(sub));
}

void write_friendship(std::ostream& out, const FriendshipNetwork& g) {
    for (auto [a, b] : g.edges()) out << a << ' ' << b << '\n';
}

FriendshipNetwork read_friendship(std::istream& in, int n) {
    std::vector<std::pair<int, int>> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int a, b;
        if (!(ss >> a >> b)) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 'i j'");
        edges.emplace_back(a, b);
    }
    return FriendshipNetwork(n, std::move(edges));
}

int MultiLayer::multiplicity(int i, int j) const noexcept {
    for (const auto& p : partners_[static_cast<std::size_t>(i)])
        if (p.node == j) return p.units;
    return 0;
}

void MultiLayer::add(int i, int j, int units) {
    if (i == j) throw std::invalid_argument("self-edge in multilayer");
    auto bump = [units](std::vector<Partner>& list, int other) {
        for (auto& p : list)
            if (p.node == other) {
                p.units += units;
                return;
            }
        list.push_back({other, units});
    };
    bump(partners_[static_cast<std::size_t>(i)], j);
    bump(partners_[static_cast<std::size_t>(j)], i);
    total_units_ += units;
}

void MultiLayer::remove(int i, int j) {
    auto drop = [](std::vector<Partner>& list, int other) {
        const auto it = std::find_if(list.begin(), list.end(), [other](const Partner& p) { return p.node == other; });
        if (it == list.end()) throw std::logic_error("removing a unit from an empty dyad");
        if (--it->units == 0) list.erase(it);
    };
    drop(partners_[static_cast<std::size_t>(i)], j);
    drop(partners_[static_cast<std::size_t>(j)], i);
    --total_units_;
}

int MultiLayer::row_sum(int i) const noexcept {
    int s = 0;
    for (const auto& p : partners_[static_cast<std::size_t>(i)]) s += p.units;
    return s;
}

std::size_t MultiLayer::dyad_count() const noexcept {
    std::size_t c = 0;
    for (const auto& list : partners_) c += list.size();
    return c / 2;
}

std::vector<WeightedEdge> MultiLayer::entries() const {
    std::vector<WeightedEdge> out;
    for (int i = 0; i < n_; ++i)
        for (const auto& p : partners_[static_cast<std::size_t>(i)])
            if (i < p.node) out.push_back({i, p.node, p.units});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
    return out;
}

int MultiLayer::max_multiplicity() const noexcept {
    int m = 0;
    for (const auto& list : partners_)
        for (const auto& p : list) m = std::max(m, p.units);
    return m;
}

void write_edge_list(std::ostream& out, const MultiLayer& layer) {
    for (const auto& e : layer.entries()) out << e.i << ' ' << e.j << ' ' << e.weight << '\n';
}

MultiLayer read_edge_list(std::istream& in, int n) {
    MultiLayer layer(n);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int a, b, m;
        if (!(ss >> a >> b >> m) || a < 0 || b < 0 || a >= n || b >= n || m <= 0)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 'i j multiplicity'");
        layer.add(a, b, m);
    }
    return layer;
}

ContactNetwork::ContactNetwork(int n, std::vector<WeightedEdge> entries) : n_(n) {
    for (auto& e : entries) {
        if (e.i > e.j) std::swap(e.i, e.j);
        if (e.i == e.j || e.i < 0 || e.j >= n) throw std::invalid_argument("bad contact entry");
        if (e.weight <= 0 || e.weight > 255) throw std::invalid_argument("contact units out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
    // Merge duplicates.
    std::vector<WeightedEdge> merged;
    merged.reserve(entries.size());
    for (const auto& e : entries) {
        if (!merged.empty() && merged.back().i == e.i && merged.back().j == e.j)
            merged.back().weight += e.weight;
        else
            merged.push_back(e);
    }
    std::vector<std::size_t> deg(static_cast<std::size_t>(n), 0);
    for (const auto& e : merged) {
        if (e.weight > 255) throw std::invalid_argument("contact units out of range");
        ++deg[static_cast<std::size_t>(e.i)];
        ++deg[static_cast<std::size_t>(e.j)];
        total_units_ += e.weight;
    }
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) offsets_[i + 1] = offsets_[i] + deg[i];
    contacts_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    // Lower neighbors first, then upper: with entries sorted by (i, j) each row
    // comes out in ascending neighbor order.
    for (const auto& e : merged)
        contacts_[fill[static_cast<std::size_t>(e.j)]++] = {e.i, static_cast<std::uint8_t>(e.weight)};
    for (const auto& e : merged)
        contacts_[fill[static_cast<std::size_t>(e.i)]++] = {e.j, static_cast<std::uint8_t>(e.weight)};
}

ContactNetwork ContactNetwork::from_layer(const MultiLayer& layer, int scale) {
    auto entries = layer.entries();
    for (auto& e : entries) e.weight *= scale;
    return ContactNetwork(layer.n(), std::move(entries));
}

int ContactNetwork::units(int i, int j) const noexcept {
    auto row = contacts(i);
    auto it = std::lower_bound(row.begin(), row.end(), j, [](const Contact& c, int v) { return c.node < v; });
    return it != row.end() && it->node == j ? it->units : 0;
}

int ContactNetwork::row_sum(int i) const noexcept {
    int s = 0;
    for (const auto& c : contacts(i)) s += c.units;
    return s;
}

std::vector<WeightedEdge> ContactNetwork::entries() const {
    std::vector<WeightedEdge> out;
    out.reserve(dyad_count());
    for (int i = 0; i < n_; ++i)
        for (const auto& c : contacts(i))
            if (i < c.node) out.push_back({i, c.node, c.units});
    return out;
}

void write_contact_network(std::ostream& out, const ContactNetwork& net, int day) {
    out << day << ' ' << net.n() << ' ' << net.total_units() << '\n';
    for (const auto& e : net.entries()) out << e.i << ' ' << e.j << ' ' << e.weight << '\n';
}

}  // namespace schoolnet
