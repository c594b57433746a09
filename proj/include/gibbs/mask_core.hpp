#pragma once

// Weight-magnitude math shared by every pruning Hamiltonian: quantiles of
// squared magnitudes, neighbourhood statistics, converged masks.
//
// A mask entry of -1 means the weight is pruned, +1 means it is kept.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gibbs {

using Index = Eigen::Index;

template <typename Scalar>
using WeightVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using PruneMask = Eigen::Matrix<std::int8_t, Eigen::Dynamic, 1>;

/// Routes non-fatal diagnostics (e.g. non-achievable pruning fractions).
/// The default sink prints each distinct message once to stderr.
void warn(const std::string& message);
void set_warning_sink(void (*sink)(const std::string&));
void reset_warning_sink();

inline bool is_valid_mask(const PruneMask& x) {
    return (x.array() == 1 || x.array() == -1).all();
}

inline PruneMask all_kept(Index n) { return PruneMask::Constant(n, 1); }
inline PruneMask all_pruned(Index n) { return PruneMask::Constant(n, -1); }

/// Disjoint cover of {0..N-1} by nonempty index groups.
///
/// `element_channel` optionally tags every weight index with its input
/// channel; the bipartite colouring uses it for filter-wise neighbourhoods.
class Partition {
public:
    Partition() = default;
    Partition(Index n, std::vector<std::vector<Index>> groups,
              std::optional<std::vector<int>> element_channel = std::nullopt);

    static Partition singletons(Index n);
    static Partition contiguous(Index n, Index block);

    Index size() const { return n_; }
    Index group_count() const { return static_cast<Index>(groups_.size()); }
    const std::vector<Index>& group(Index k) const { return groups_[static_cast<std::size_t>(k)]; }
    const std::vector<std::vector<Index>>& groups() const { return groups_; }
    Index group_of(Index i) const { return owner_[static_cast<std::size_t>(i)]; }
    Index max_group_size() const;
    const std::optional<std::vector<int>>& element_channel() const { return element_channel_; }

    friend bool operator==(const Partition&, const Partition&) = default;

private:
    Index n_ = 0;
    std::vector<std::vector<Index>> groups_;
    std::vector<Index> owner_;
    std::optional<std::vector<int>> element_channel_;
};

namespace detail {

inline void check_fraction(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("pruning fraction must lie in [0,1], got " + std::to_string(p));
    }
}

template <typename Scalar>
void check_weights(const WeightVector<Scalar>& w) {
    if (w.size() < 1) throw std::invalid_argument("weight vector must be nonempty");
    if (!w.allFinite()) throw std::invalid_argument("weight vector contains non-finite values");
}

// Position p(N-1) in the ascending order, snapped to an integer when the
// floating-point product misses it by rounding noise.
inline double quantile_position(double p, Index n) {
    double pos = p * static_cast<double>(n - 1);
    double r = std::round(pos);
    if (std::abs(pos - r) <= 1e-9 * std::max(1.0, static_cast<double>(n))) pos = r;
    return pos;
}

}  // namespace detail

/// Q(p, w): empirical p-th quantile of the squared magnitudes of `w`.
///
/// With v the squared magnitudes in ascending order and pos = p(N-1), returns
/// v[pos] when pos is integral, otherwise the linear interpolation between
/// v[floor(pos)] and v[ceil(pos)]. Runs in O(N) via selection.
template <typename Scalar>
Scalar squared_quantile(double p, const WeightVector<Scalar>& w) {
    detail::check_fraction(p);
    detail::check_weights(w);
    const Index n = w.size();
    std::vector<Scalar> v(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = w[i] * w[i];

    const double pos = detail::quantile_position(p, n);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const Scalar q_lo = v[lo];
    if (hi == lo) return q_lo;
    const Scalar q_hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    const Scalar frac = static_cast<Scalar>(pos - static_cast<double>(lo));
    return q_lo + frac * (q_hi - q_lo);
}

/// Root-mean-square weight of every neighbourhood.
template <typename Scalar>
WeightVector<Scalar> neighbourhood_rms(const WeightVector<Scalar>& w, const Partition& part) {
    if (part.size() != w.size()) throw std::invalid_argument("partition does not match weight count");
    WeightVector<Scalar> out(part.group_count());
    for (Index k = 0; k < part.group_count(); ++k) {
        Scalar acc = 0;
        for (Index i : part.group(k)) acc += w[i] * w[i];
        out[k] = std::sqrt(acc / static_cast<Scalar>(part.group(k).size()));
    }
    return out;
}

/// Number of weights pruned by the unstructured converged mask: round(p*N).
/// Warns when p*N is not integral.
std::int64_t achievable_pruned_count(double p, Index n);

/// Unstructured converged mask: the round(p*N) smallest squared magnitudes are
/// pruned, ties broken by ascending index.
template <typename Scalar>
PruneMask converged_mask_unstructured(double p, const WeightVector<Scalar>& w) {
    detail::check_fraction(p);
    detail::check_weights(w);
    const Index n = w.size();
    const auto count = achievable_pruned_count(p, n);
    PruneMask x = all_kept(n);
    if (count == 0) return x;

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    auto less = [&](Index a, Index b) {
        const Scalar wa = w[a] * w[a], wb = w[b] * w[b];
        return wa < wb || (wa == wb && a < b);
    };
    std::nth_element(order.begin(), order.begin() + (count - 1), order.end(), less);
    for (std::int64_t j = 0; j < count; ++j) x[order[static_cast<std::size_t>(j)]] = -1;
    return x;
}

/// Groups ordered by ascending mean squared magnitude, ties by group index.
template <typename Scalar>
std::vector<Index> groups_by_rms(const WeightVector<Scalar>& w, const Partition& part) {
    const WeightVector<Scalar> rms = neighbourhood_rms(w, part);
    std::vector<Index> order(static_cast<std::size_t>(part.group_count()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return rms[a] * rms[a] < rms[b] * rms[b]; });
    return order;
}

/// Number of whole neighbourhoods (taken in `order`) whose weight count is
/// nearest p*N. Warns when the match is not exact.
Index achievable_pruned_groups(double p, const Partition& part, const std::vector<Index>& order);

/// Structured converged mask: whole neighbourhoods with the smallest mean
/// squared magnitude are pruned until the pruned weight fraction is the
/// achievable value nearest p.
template <typename Scalar>
PruneMask converged_mask_structured(double p, const WeightVector<Scalar>& w, const Partition& part) {
    detail::check_fraction(p);
    detail::check_weights(w);
    const auto order = groups_by_rms(w, part);
    const Index pruned_groups = achievable_pruned_groups(p, part, order);
    PruneMask x = all_kept(w.size());
    for (Index j = 0; j < pruned_groups; ++j) {
        for (Index i : part.group(order[static_cast<std::size_t>(j)])) x[i] = -1;
    }
    return x;
}

/// w_i * (x_i + 1) / 2.
template <typename Scalar>
WeightVector<Scalar> apply_mask(const WeightVector<Scalar>& w, const PruneMask& x) {
    if (w.size() != x.size()) throw std::invalid_argument("apply_mask: length mismatch");
    return (x.array() == 1).select(w, WeightVector<Scalar>::Zero(w.size()));
}

inline double pruned_fraction(const PruneMask& x) {
    if (x.size() == 0) return 0.0;
    return static_cast<double>((x.array() == -1).count()) / static_cast<double>(x.size());
}

inline double mask_agreement(const PruneMask& a, const PruneMask& b) {
    if (a.size() != b.size()) throw std::invalid_argument("mask_agreement: length mismatch");
    if (a.size() == 0) return 1.0;
    return static_cast<double>((a.array() == b.array()).count()) / static_cast<double>(a.size());
}

/// True when all members of every neighbourhood share one mask value.
bool is_neighbourhood_uniform(const PruneMask& x, const Partition& part);

}  // namespace gibbs
