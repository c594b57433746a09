#pragma once

// Energy functions over pruning masks. Every Hamiltonian here is a function
// of the current weight magnitudes only; coefficients are rebuilt from the
// weights whenever the caller asks.

#include "gibbs/mask_core.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <utility>

namespace gibbs {

enum class Variant {
    BinaryUnstructured,
    BinaryStructured,
    LinearSign,    // a_i = sgn(Q - w_i^2)
    LinearSquare,  // a_i = Q - w_i^2
    LinearAbs,     // a_i = sqrt(Q) - |w_i|
    StructuredLinear,
    StructuredQuadratic,
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

inline bool is_structured(Variant v) {
    return v == Variant::BinaryStructured || v == Variant::StructuredLinear ||
           v == Variant::StructuredQuadratic;
}
inline bool is_binary(Variant v) {
    return v == Variant::BinaryUnstructured || v == Variant::BinaryStructured;
}
inline bool is_linear(Variant v) {
    return v == Variant::LinearSign || v == Variant::LinearSquare || v == Variant::LinearAbs ||
           v == Variant::StructuredLinear;
}

/// Per-element bipartite side within each neighbourhood (0 or 1).
struct Colouring {
    std::vector<std::uint8_t> colour;
};

/// Pairwise couplings of weight -c between members of the same
/// neighbourhood. Either complete within each neighbourhood, or complete
/// bipartite between the two colours of a Colouring.
class CouplingGraph {
public:
    CouplingGraph(std::shared_ptr<const Partition> part, double c);

    double c() const { return c_; }
    double edge_weight() const { return -c_; }
    const Partition& partition() const { return *part_; }
    std::shared_ptr<const Partition> partition_ptr() const { return part_; }
    bool is_bipartite() const { return !side_.empty(); }
    const std::vector<std::uint8_t>& sides() const { return side_; }

    std::size_t edge_count() const;
    std::size_t group_edge_count(Index k) const;
    bool has_edge(Index i, Index j) const;
    std::vector<std::pair<Index, Index>> edges() const;

    /// Sum of x_i x_j over the edges inside neighbourhood k.
    double group_pair_sum(Index k, const PruneMask& x) const;
    /// Sum of x_i x_j over all edges.
    double pair_sum(const PruneMask& x) const;

    CouplingGraph with_sides(std::vector<std::uint8_t> sides) const;

private:
    std::shared_ptr<const Partition> part_;
    double c_;
    std::vector<std::uint8_t> side_;
};

/// Keeps only the edges joining different colours.
CouplingGraph truncate_couplings(const CouplingGraph& graph, const Colouring& col);

/// Energy model over masks of one layer.
template <typename Scalar>
struct BasicHamiltonian {
    Variant variant = Variant::LinearSquare;
    double p = 0.0;
    /// a for linear variants, b for the quadratic variant.
    WeightVector<Scalar> coeffs;
    std::optional<CouplingGraph> couplings;
    /// Binary variants only.
    std::optional<PruneMask> converged_mask;
    std::shared_ptr<const Partition> partition;

    Index size() const;
};

using Hamiltonian = BasicHamiltonian<double>;

namespace detail {

// sgn(gap) where an exact tie (gap == 0) takes the side chosen by the
// converged mask, so the argmin of the sign Hamiltonian is always x_cvg.
template <typename Scalar>
WeightVector<Scalar> tie_aware_sign(const WeightVector<Scalar>& gap, const PruneMask& converged) {
    WeightVector<Scalar> a(gap.size());
    for (Index i = 0; i < gap.size(); ++i) {
        if (gap[i] > 0) a[i] = 1;
        else if (gap[i] < 0) a[i] = -1;
        else a[i] = converged[i] == -1 ? Scalar(1) : Scalar(-1);
    }
    return a;
}

}  // namespace detail

/// Linear coefficients for the three unstructured linear variants.
template <typename Scalar>
WeightVector<Scalar> build_linear_coeffs(Variant variant, double p, const WeightVector<Scalar>& w) {
    const Scalar q = squared_quantile(p, w);
    const WeightVector<Scalar> gap = q - w.array().square();
    switch (variant) {
        case Variant::LinearSign:
            return detail::tie_aware_sign(gap, converged_mask_unstructured(p, w));
        case Variant::LinearSquare:
            return gap;
        case Variant::LinearAbs:
            return std::sqrt(q) - w.array().abs();
        default:
            throw std::invalid_argument("build_linear_coeffs: not an unstructured linear variant");
    }
}

/// a_i = sgn(Q(p, rms) - rms_k^2) for every i in neighbourhood k, with
/// exact ties following the structured converged mask.
template <typename Scalar>
WeightVector<Scalar> build_structured_linear_coeffs(double p, const WeightVector<Scalar>& w,
                                                    const Partition& part) {
    const WeightVector<Scalar> rms = neighbourhood_rms(w, part);
    const Scalar q = squared_quantile(p, rms);
    WeightVector<Scalar> gap(w.size());
    for (Index k = 0; k < part.group_count(); ++k) {
        for (Index i : part.group(k)) gap[i] = q - rms[k] * rms[k];
    }
    return detail::tie_aware_sign(gap, converged_mask_structured(p, w, part));
}

/// b_i = Q(p, rms) - w_i^2 together with couplings -c inside neighbourhoods.
template <typename Scalar>
BasicHamiltonian<Scalar> build_quadratic(double p, const WeightVector<Scalar>& w,
                                         std::shared_ptr<const Partition> part, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("coupling c must be positive");
    if (!part) throw std::invalid_argument("quadratic Hamiltonian needs a partition");
    const WeightVector<Scalar> rms = neighbourhood_rms(w, *part);
    const Scalar q = squared_quantile(p, rms);
    BasicHamiltonian<Scalar> h;
    h.variant = Variant::StructuredQuadratic;
    h.p = p;
    h.coeffs = q - w.array().square();
    h.couplings.emplace(part, c);
    h.partition = std::move(part);
    return h;
}

/// Builds any variant from the current weights. `part` is required for the
/// structured variants and `c` for the quadratic one.
template <typename Scalar>
BasicHamiltonian<Scalar> build_hamiltonian(Variant variant, double p, const WeightVector<Scalar>& w,
                                           std::shared_ptr<const Partition> part = nullptr,
                                           double c = 0.0) {
    if (is_structured(variant) && !part) {
        throw std::invalid_argument(std::string(to_string(variant)) + " needs a partition");
    }
    if (part && part->size() != w.size()) throw std::invalid_argument("partition does not match weights");
    BasicHamiltonian<Scalar> h;
    switch (variant) {
        case Variant::StructuredQuadratic:
            return build_quadratic(p, w, std::move(part), c);
        case Variant::BinaryUnstructured:
            h.converged_mask = converged_mask_unstructured(p, w);
            break;
        case Variant::BinaryStructured:
            h.converged_mask = converged_mask_structured(p, w, *part);
            break;
        case Variant::StructuredLinear:
            h.coeffs = build_structured_linear_coeffs(p, w, *part);
            break;
        default:
            h.coeffs = build_linear_coeffs(variant, p, w);
            break;
    }
    h.variant = variant;
    h.p = p;
    h.partition = std::move(part);
    return h;
}

template <typename Scalar>
Index BasicHamiltonian<Scalar>::size() const {
    if (converged_mask) return converged_mask->size();
    return coeffs.size();
}

template <typename Scalar>
double energy(const BasicHamiltonian<Scalar>& h, const PruneMask& x) {
    if (x.size() != h.size()) throw std::invalid_argument("energy: mask length mismatch");
    if (is_binary(h.variant)) return (x == *h.converged_mask) ? 0.0 : 1.0;
    double e = static_cast<double>(h.coeffs.dot(x.template cast<Scalar>()));
    if (h.couplings) e += h.couplings->edge_weight() * h.couplings->pair_sum(x);
    return e;
}

/// Energy restricted to neighbourhood k. Summing over k recovers energy()
/// for the linear and quadratic variants.
template <typename Scalar>
double neighbourhood_energy(const BasicHamiltonian<Scalar>& h, Index k, const PruneMask& x) {
    if (!h.partition || is_binary(h.variant)) {
        throw std::invalid_argument("neighbourhood_energy needs a partitioned linear/quadratic Hamiltonian");
    }
    double e = 0.0;
    for (Index i : h.partition->group(k)) e += static_cast<double>(h.coeffs[i]) * x[i];
    if (h.couplings) e += h.couplings->edge_weight() * h.couplings->group_pair_sum(k, x);
    return e;
}

/// Coupling strength at which the minimum-energy state of the quadratic
/// Hamiltonian is forced to be neighbourhood-uniform: any c strictly above
/// the returned (max_x b.x - min_x b.x) = 2 sum |b_i| works.
template <typename Derived>
double min_coupling_for_uniformity(const Eigen::MatrixBase<Derived>& b) {
    return 2.0 * static_cast<double>(b.cwiseAbs().sum());
}

}  // namespace gibbs
