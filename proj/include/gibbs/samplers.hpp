#pragma once

// Draws pruning masks from Gibbs distributions p(x) ~ exp(-beta H(x)).
//
// Every sampler takes the caller's RandomSource by reference, splits one
// child stream off it, and derives each element's uniform from the child's
// counter. Results are therefore identical for any OpenMP thread count.

#include "gibbs/hamiltonians.hpp"
#include "gibbs/random.hpp"

namespace gibbs {

struct SamplerOptions {
    /// Neighbourhoods up to this size are sampled by exact enumeration.
    Index max_block = 16;
    /// Chromatic Gibbs sweeps per sampling call.
    int mcmc_iters = 50;
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// P[x_i = -1] for a single spin with linear coefficient a: sigmoid(2 beta a).
inline double prune_probability(double a, double beta) { return sigmoid(2.0 * beta * a); }

/// Independent draws with P[x_i = -1] = 1 / (1 + exp(-2 beta a_i)).
PruneMask sample_linear(const Eigen::Ref<const Eigen::VectorXd>& a, double beta, RandomSource& rng);

/// log p_cvg for the binary Hamiltonian over n elements:
/// p_cvg = (1 - e^-beta) / ((2^n - 1) e^-beta + 1), evaluated in the log
/// domain. Returns -inf when p_cvg underflows.
double log_binary_converged_probability(Index n, double beta);
inline double binary_converged_probability(Index n, double beta) {
    return std::exp(log_binary_converged_probability(n, beta));
}

/// Returns x_cvg with probability p_cvg, otherwise a uniform mask.
PruneMask sample_binary(const PruneMask& converged, double beta, RandomSource& rng);

/// Samples each neighbourhood independently from its exact Boltzmann
/// distribution over 2^|N_k| states. Throws std::length_error when a
/// neighbourhood exceeds `max_block`.
PruneMask sample_block_exact(const Hamiltonian& h, double beta, RandomSource& rng, Index max_block = 16);

/// Splits each neighbourhood into two colours. Uses input-channel parity
/// when the partition carries channel labels, otherwise the parity of the
/// element's rank inside its neighbourhood.
Colouring make_bipartite_colouring(const Partition& part);

/// Chain initialization from the structure-respecting approximation: each
/// neighbourhood draws one shared value with
/// P[-1] = sigmoid(2 beta |N_k| (Q(p, rms) - rms_k^2)).
PruneMask init_chain(double p, const Eigen::VectorXd& w, const Partition& part, double beta,
                     RandomSource& rng);

/// Same as init_chain, using the per-neighbourhood sums of quadratic
/// coefficients b, which equal |N_k| (Q(p, rms) - rms_k^2).
PruneMask init_chain_from_coeffs(const Eigen::VectorXd& b, const Partition& part, double beta,
                                 RandomSource& rng);

/// Conditional P[x_i = -1 | rest] under a bipartite quadratic Hamiltonian:
/// sigmoid(2 beta g_i) with g_i = b_i - c * sum_{j ~ i} x_j.
double conditional_prune_probability(const Hamiltonian& truncated, const PruneMask& x, Index i, double beta);

/// The quadratic Hamiltonian with couplings truncated to the bipartite
/// colouring used by the chromatic sampler.
Hamiltonian truncated_for_chromatic(const Hamiltonian& h);

/// Chromatic Gibbs sampling of a quadratic Hamiltonian: initialize with
/// init_chain, then `iters` sweeps, each resampling colour 0 then colour 1.
/// Targets the truncated (bipartite) Hamiltonian.
PruneMask sample_chromatic(const Hamiltonian& h, double beta, int iters, RandomSource& rng);

/// Dispatches on the Hamiltonian variant.
PruneMask sample_mask(const Hamiltonian& h, double beta, RandomSource& rng, const SamplerOptions& opts = {});

}  // namespace gibbs
