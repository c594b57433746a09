#include "gibbs/mask_core.hpp"

#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

namespace gibbs {

namespace {

std::mutex g_warn_mutex;
std::set<std::string> g_seen;

void default_sink(const std::string& message) {
    if (g_seen.insert(message).second) std::cerr << "warning: " << message << '\n';
}

void (*g_sink)(const std::string&) = default_sink;

}  // namespace

void warn(const std::string& message) {
    std::lock_guard lock(g_warn_mutex);
    g_sink(message);
}

void set_warning_sink(void (*sink)(const std::string&)) {
    std::lock_guard lock(g_warn_mutex);
    g_sink = sink ? sink : default_sink;
}

void reset_warning_sink() { set_warning_sink(nullptr); }

Partition::Partition(Index n, std::vector<std::vector<Index>> groups,
                     std::optional<std::vector<int>> element_channel)
    : n_(n), groups_(std::move(groups)), element_channel_(std::move(element_channel)) {
    if (n_ < 1) throw std::invalid_argument("partition must cover at least one index");
    owner_.assign(static_cast<std::size_t>(n_), -1);
    for (std::size_t k = 0; k < groups_.size(); ++k) {
        if (groups_[k].empty()) throw std::invalid_argument("partition contains an empty neighbourhood");
        for (Index i : groups_[k]) {
            if (i < 0 || i >= n_) throw std::invalid_argument("partition index out of range");
            auto& o = owner_[static_cast<std::size_t>(i)];
            if (o != -1) throw std::invalid_argument("partition neighbourhoods overlap");
            o = static_cast<Index>(k);
        }
    }
    for (Index o : owner_) {
        if (o == -1) throw std::invalid_argument("partition does not cover every index");
    }
    if (element_channel_ && static_cast<Index>(element_channel_->size()) != n_) {
        throw std::invalid_argument("element_channel length must equal N");
    }
}

Partition Partition::singletons(Index n) {
    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) groups[static_cast<std::size_t>(i)] = {i};
    return Partition(n, std::move(groups));
}

Partition Partition::contiguous(Index n, Index block) {
    if (block < 1) throw std::invalid_argument("block size must be positive");
    std::vector<std::vector<Index>> groups;
    for (Index start = 0; start < n; start += block) {
        std::vector<Index> g;
        for (Index i = start; i < std::min(n, start + block); ++i) g.push_back(i);
        groups.push_back(std::move(g));
    }
    return Partition(n, std::move(groups));
}

Index Partition::max_group_size() const {
    std::size_t m = 0;
    for (const auto& g : groups_) m = std::max(m, g.size());
    return static_cast<Index>(m);
}

std::int64_t achievable_pruned_count(double p, Index n) {
    const double target = p * static_cast<double>(n);
    const auto count = static_cast<std::int64_t>(std::llround(target));
    if (std::abs(target - static_cast<double>(count)) > 1e-9) {
        std::ostringstream os;
        os << "pruning fraction " << p << " is not achievable for N=" << n << "; pruning " << count
           << " weights (fraction " << static_cast<double>(count) / static_cast<double>(n) << ")";
        warn(os.str());
    }
    return count;
}

Index achievable_pruned_groups(double p, const Partition& part, const std::vector<Index>& order) {
    const double target = p * static_cast<double>(part.size());
    Index best = 0;
    double best_gap = target;
    Index cum = 0;
    for (std::size_t j = 0; j < order.size(); ++j) {
        cum += static_cast<Index>(part.group(order[j]).size());
        const double gap = std::abs(static_cast<double>(cum) - target);
        if (gap < best_gap - 1e-9) {
            best_gap = gap;
            best = static_cast<Index>(j + 1);
        }
    }
    if (best_gap > 1e-9) {
        std::ostringstream os;
        os << "pruning fraction " << p << " is not achievable with " << part.group_count()
           << " neighbourhoods over N=" << part.size() << "; pruning " << best << " neighbourhoods";
        warn(os.str());
    }
    return best;
}

bool is_neighbourhood_uniform(const PruneMask& x, const Partition& part) {
    if (x.size() != part.size()) return false;
    for (const auto& g : part.groups()) {
        for (Index i : g) {
            if (x[i] != x[g.front()]) return false;
        }
    }
    return true;
}

}  // namespace gibbs
