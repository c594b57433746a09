#include "gibbs/samplers.hpp"

#include <array>
#include <bit>
#include <limits>
#include <numbers>

namespace gibbs {

namespace {

void check_beta(double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

// One shared value per neighbourhood with P[-1] = sigmoid(2 beta coeff_k).
PruneMask sample_groups(const std::vector<double>& group_coeff, const Partition& part, double beta,
                        RandomSource& rng) {
    const RandomSource stream = rng.split();
    PruneMask x(part.size());
    for (Index k = 0; k < part.group_count(); ++k) {
        const double prob = prune_probability(group_coeff[static_cast<std::size_t>(k)], beta);
        const std::int8_t v = stream.uniform_at(static_cast<std::uint64_t>(k)) < prob ? -1 : 1;
        for (Index i : part.group(k)) x[i] = v;
    }
    return x;
}

}  // namespace

PruneMask sample_linear(const Eigen::Ref<const Eigen::VectorXd>& a, double beta, RandomSource& rng) {
    check_beta(beta);
    const RandomSource stream = rng.split();
    const Index n = a.size();
    PruneMask x(n);
#pragma omp parallel for schedule(static) if (n > 4096)
    for (Index i = 0; i < n; ++i) {
        x[i] = stream.uniform_at(static_cast<std::uint64_t>(i)) < prune_probability(a[i], beta) ? -1 : 1;
    }
    return x;
}

double log_binary_converged_probability(Index n, double beta) {
    check_beta(beta);
    const double log_num = std::log(-std::expm1(-beta));
    // log(2^n - 1) without overflow
    const double log_states = static_cast<double>(n) * std::numbers::ln2 +
                              std::log1p(-std::exp2(-static_cast<double>(n)));
    const double t = log_states - beta;
    const double log_den = std::max(0.0, t) + std::log1p(std::exp(-std::abs(t)));
    return log_num - log_den;
}

PruneMask sample_binary(const PruneMask& converged, double beta, RandomSource& rng) {
    const double p_cvg = binary_converged_probability(converged.size(), beta);
    const RandomSource stream = rng.split();
    if (stream.uniform_at(0) < p_cvg) return converged;
    PruneMask x(converged.size());
    for (Index i = 0; i < x.size(); ++i) {
        x[i] = stream.uniform_at(static_cast<std::uint64_t>(i) + 1) < 0.5 ? -1 : 1;
    }
    return x;
}

PruneMask sample_block_exact(const Hamiltonian& h, double beta, RandomSource& rng, Index max_block) {
    check_beta(beta);
    if (is_binary(h.variant)) throw std::invalid_argument("sample_block_exact: binary Hamiltonians use sample_binary");
    const Index n = h.coeffs.size();
    const Partition part = h.partition ? *h.partition : Partition::singletons(n);
    if (part.max_group_size() > max_block) {
        throw std::length_error("neighbourhood of size " + std::to_string(part.max_group_size()) +
                                " exceeds max_block " + std::to_string(max_block) +
                                "; use the chromatic sampler");
    }
    const double c = h.couplings ? h.couplings->c() : 0.0;
    const bool bipartite = h.couplings && h.couplings->is_bipartite();
    const RandomSource stream = rng.split();
    PruneMask x(n);

#pragma omp parallel
    {
        std::vector<double> energies;
#pragma omp for schedule(dynamic)
        for (Index k = 0; k < part.group_count(); ++k) {
            const auto& g = part.group(k);
            const int m = static_cast<int>(g.size());
            const std::size_t states = std::size_t{1} << m;
            energies.resize(states);

            // Gray-code walk from the all-kept state; bit j set means x_j = -1.
            std::vector<std::int8_t> spin(static_cast<std::size_t>(m), 1);
            double lin = 0, s0 = 0, s1 = 0;
            for (int j = 0; j < m; ++j) {
                lin += h.coeffs[g[static_cast<std::size_t>(j)]];
                const bool side1 = bipartite && h.couplings->sides()[static_cast<std::size_t>(g[static_cast<std::size_t>(j)])];
                (side1 ? s1 : s0) += 1;
            }
            auto pair_term = [&] { return bipartite ? s0 * s1 : ((s0 * s0) - m) / 2.0; };
            energies[0] = -c * pair_term() + lin;
            for (std::size_t t = 1; t < states; ++t) {
                const int j = std::countr_zero(t);
                const Index idx = g[static_cast<std::size_t>(j)];
                const double old = spin[static_cast<std::size_t>(j)];
                spin[static_cast<std::size_t>(j)] = static_cast<std::int8_t>(-old);
                lin -= 2.0 * old * h.coeffs[idx];
                const bool side1 = bipartite && h.couplings->sides()[static_cast<std::size_t>(idx)];
                (side1 ? s1 : s0) -= 2.0 * old;
                energies[t ^ (t >> 1)] = -c * pair_term() + lin;
            }

            // Subtracting the minimum energy keeps every weight in (0, 1].
            const double e_min = *std::min_element(energies.begin(), energies.begin() + static_cast<std::ptrdiff_t>(states));
            double total = 0;
            for (std::size_t s = 0; s < states; ++s) {
                energies[s] = std::exp(-beta * (energies[s] - e_min));
                total += energies[s];
            }
            const double target = stream.uniform_at(static_cast<std::uint64_t>(k)) * total;
            std::size_t chosen = states - 1;
            double acc = 0;
            for (std::size_t s = 0; s < states; ++s) {
                acc += energies[s];
                if (target < acc) {
                    chosen = s;
                    break;
                }
            }
            for (int j = 0; j < m; ++j) x[g[static_cast<std::size_t>(j)]] = (chosen >> j) & 1U ? -1 : 1;
        }
    }
    return x;
}

Colouring make_bipartite_colouring(const Partition& part) {
    Colouring col;
    col.colour.assign(static_cast<std::size_t>(part.size()), 0);
    const auto& channel = part.element_channel();
    for (const auto& g : part.groups()) {
        bool used_channels = false;
        if (channel) {
            int seen = 0;
            for (Index i : g) seen |= 1 << ((*channel)[static_cast<std::size_t>(i)] & 1);
            if (seen == 3 || g.size() < 2) {
                for (Index i : g) col.colour[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((*channel)[static_cast<std::size_t>(i)] & 1);
                used_channels = true;
            }
        }
        if (!used_channels) {
            for (std::size_t r = 0; r < g.size(); ++r) col.colour[static_cast<std::size_t>(g[r])] = static_cast<std::uint8_t>(r & 1U);
        }
    }
    return col;
}

PruneMask init_chain(double p, const Eigen::VectorXd& w, const Partition& part, double beta, RandomSource& rng) {
    check_beta(beta);
    const Eigen::VectorXd rms = neighbourhood_rms(w, part);
    const double q = squared_quantile(p, rms);
    std::vector<double> coeff(static_cast<std::size_t>(part.group_count()));
    for (Index k = 0; k < part.group_count(); ++k) {
        coeff[static_cast<std::size_t>(k)] = static_cast<double>(part.group(k).size()) * (q - rms[k] * rms[k]);
    }
    return sample_groups(coeff, part, beta, rng);
}

PruneMask init_chain_from_coeffs(const Eigen::VectorXd& b, const Partition& part, double beta, RandomSource& rng) {
    check_beta(beta);
    std::vector<double> coeff(static_cast<std::size_t>(part.group_count()), 0.0);
    for (Index k = 0; k < part.group_count(); ++k) {
        for (Index i : part.group(k)) coeff[static_cast<std::size_t>(k)] += b[i];
    }
    return sample_groups(coeff, part, beta, rng);
}

double conditional_prune_probability(const Hamiltonian& truncated, const PruneMask& x, Index i, double beta) {
    const auto& graph = *truncated.couplings;
    const auto& part = graph.partition();
    double neighbours = 0;
    for (Index j : part.group(part.group_of(i))) {
        if (graph.has_edge(i, j)) neighbours += x[j];
    }
    return prune_probability(truncated.coeffs[i] - graph.c() * neighbours, beta);
}

Hamiltonian truncated_for_chromatic(const Hamiltonian& h) {
    if (h.variant != Variant::StructuredQuadratic || !h.couplings) {
        throw std::invalid_argument("chromatic sampling needs a structured-quadratic Hamiltonian");
    }
    Hamiltonian t = h;
    if (!h.couplings->is_bipartite()) {
        t.couplings = truncate_couplings(*h.couplings, make_bipartite_colouring(*h.partition));
    }
    return t;
}

PruneMask sample_chromatic(const Hamiltonian& h, double beta, int iters, RandomSource& rng) {
    check_beta(beta);
    if (iters < 1) throw std::invalid_argument("chromatic sampler needs at least one sweep");
    const Hamiltonian t = truncated_for_chromatic(h);
    const auto& graph = *t.couplings;
    const auto& part = graph.partition();
    const auto& sides = graph.sides();
    const Index n = part.size();
    const Index m = part.group_count();
    const double c = graph.c();

    PruneMask x = init_chain_from_coeffs(t.coeffs, part, beta, rng);
    const RandomSource stream = rng.split();

    std::array<std::vector<Index>, 2> members;
    for (Index i = 0; i < n; ++i) members[sides[static_cast<std::size_t>(i)]].push_back(i);
    std::array<std::vector<double>, 2> sums{std::vector<double>(static_cast<std::size_t>(m), 0.0),
                                            std::vector<double>(static_cast<std::size_t>(m), 0.0)};
    auto recompute = [&](int colour) {
        auto& s = sums[static_cast<std::size_t>(colour)];
        std::fill(s.begin(), s.end(), 0.0);
        for (Index i : members[static_cast<std::size_t>(colour)]) s[static_cast<std::size_t>(part.group_of(i))] += x[i];
    };
    recompute(0);
    recompute(1);

    for (int sweep = 0; sweep < iters; ++sweep) {
        for (int colour = 0; colour < 2; ++colour) {
            const auto& mine = members[static_cast<std::size_t>(colour)];
            const auto& other = sums[static_cast<std::size_t>(1 - colour)];
            const auto base = static_cast<std::uint64_t>(2 * sweep + colour) * static_cast<std::uint64_t>(n);
            const auto count = static_cast<Index>(mine.size());
#pragma omp parallel for schedule(static) if (count > 4096)
            for (Index j = 0; j < count; ++j) {
                const Index i = mine[static_cast<std::size_t>(j)];
                const double g = t.coeffs[i] - c * other[static_cast<std::size_t>(part.group_of(i))];
                x[i] = stream.uniform_at(base + static_cast<std::uint64_t>(i)) < prune_probability(g, beta) ? -1 : 1;
            }
            recompute(colour);
        }
    }
    return x;
}

PruneMask sample_mask(const Hamiltonian& h, double beta, RandomSource& rng, const SamplerOptions& opts) {
    check_beta(beta);
    if (is_binary(h.variant)) return sample_binary(*h.converged_mask, beta, rng);
    if (is_linear(h.variant)) return sample_linear(h.coeffs, beta, rng);
    if (h.partition->max_group_size() <= opts.max_block) return sample_block_exact(h, beta, rng, opts.max_block);
    return sample_chromatic(h, beta, opts.mcmc_iters, rng);
}

}  // namespace gibbs
