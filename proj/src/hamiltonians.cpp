#include "gibbs/hamiltonians.hpp"

#include <array>

namespace gibbs {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 7> kVariantNames{{
    {Variant::BinaryUnstructured, "binary"},
    {Variant::BinaryStructured, "binary-structured"},
    {Variant::LinearSign, "linear-sign"},
    {Variant::LinearSquare, "linear-square"},
    {Variant::LinearAbs, "linear-abs"},
    {Variant::StructuredLinear, "structured-linear"},
    {Variant::StructuredQuadratic, "quadratic"},
}};

}  // namespace

std::string_view to_string(Variant v) {
    for (const auto& [variant, name] : kVariantNames) {
        if (variant == v) return name;
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (const auto& [variant, n] : kVariantNames) {
        if (n == name) return variant;
    }
    if (name == "binary-unstructured") return Variant::BinaryUnstructured;
    if (name == "structured-quadratic") return Variant::StructuredQuadratic;
    throw std::invalid_argument("unknown hamiltonian '" + std::string(name) + "'");
}

CouplingGraph::CouplingGraph(std::shared_ptr<const Partition> part, double c)
    : part_(std::move(part)), c_(c) {
    if (!part_) throw std::invalid_argument("coupling graph needs a partition");
}

std::size_t CouplingGraph::group_edge_count(Index k) const {
    const auto& g = part_->group(k);
    if (!is_bipartite()) return g.size() * (g.size() - 1) / 2;
    std::size_t zeros = 0;
    for (Index i : g) zeros += side_[static_cast<std::size_t>(i)] == 0;
    return zeros * (g.size() - zeros);
}

std::size_t CouplingGraph::edge_count() const {
    std::size_t total = 0;
    for (Index k = 0; k < part_->group_count(); ++k) total += group_edge_count(k);
    return total;
}

bool CouplingGraph::has_edge(Index i, Index j) const {
    if (i == j || part_->group_of(i) != part_->group_of(j)) return false;
    return !is_bipartite() || side_[static_cast<std::size_t>(i)] != side_[static_cast<std::size_t>(j)];
}

std::vector<std::pair<Index, Index>> CouplingGraph::edges() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(edge_count());
    for (const auto& g : part_->groups()) {
        for (std::size_t a = 0; a < g.size(); ++a) {
            for (std::size_t b = a + 1; b < g.size(); ++b) {
                if (has_edge(g[a], g[b])) out.emplace_back(std::min(g[a], g[b]), std::max(g[a], g[b]));
            }
        }
    }
    return out;
}

double CouplingGraph::group_pair_sum(Index k, const PruneMask& x) const {
    const auto& g = part_->group(k);
    if (is_bipartite()) {
        double s0 = 0, s1 = 0;
        for (Index i : g) (side_[static_cast<std::size_t>(i)] ? s1 : s0) += x[i];
        return s0 * s1;
    }
    double s = 0;
    for (Index i : g) s += x[i];
    // sum over unordered pairs of x_i x_j = (S^2 - n) / 2 since x_i^2 = 1
    return (s * s - static_cast<double>(g.size())) / 2.0;
}

double CouplingGraph::pair_sum(const PruneMask& x) const {
    double total = 0;
    for (Index k = 0; k < part_->group_count(); ++k) total += group_pair_sum(k, x);
    return total;
}

CouplingGraph CouplingGraph::with_sides(std::vector<std::uint8_t> sides) const {
    if (static_cast<Index>(sides.size()) != part_->size()) {
        throw std::invalid_argument("colouring length does not match the partition");
    }
    CouplingGraph g = *this;
    g.side_ = std::move(sides);
    return g;
}

CouplingGraph truncate_couplings(const CouplingGraph& graph, const Colouring& col) {
    if (!graph.is_bipartite()) return graph.with_sides(col.colour);
    // An already-bipartite graph stays representable only when the new
    // colouring agrees with the old sides up to a swap inside each group.
    const auto& part = graph.partition();
    const auto& old = graph.sides();
    for (const auto& g : part.groups()) {
        const bool same = std::all_of(g.begin(), g.end(), [&](Index i) {
            return old[static_cast<std::size_t>(i)] == col.colour[static_cast<std::size_t>(i)];
        });
        const bool swapped = std::all_of(g.begin(), g.end(), [&](Index i) {
            return old[static_cast<std::size_t>(i)] != col.colour[static_cast<std::size_t>(i)];
        });
        if (!same && !swapped) {
            throw std::invalid_argument("truncate_couplings: colouring is incompatible with existing bipartition");
        }
    }
    return graph;
}

}  // namespace gibbs
