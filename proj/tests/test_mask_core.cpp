#include <doctest.h>

#include "oracles.hpp"

#include <gibbs/mask_core.hpp>

#include <string>
#include <vector>

using namespace gibbs;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

PruneMask mask(std::initializer_list<int> v) {
    PruneMask out(static_cast<Index>(v.size()));
    Index i = 0;
    for (int x : v) out[i++] = static_cast<std::int8_t>(x);
    return out;
}

std::vector<std::string> g_warnings;
void capture(const std::string& m) { g_warnings.push_back(m); }

}  // namespace

TEST_CASE("squared_quantile examples") {
    const VectorXd w = vec({3, -1, 2});
    CHECK(squared_quantile(0.0, w) == 1.0);
    CHECK(squared_quantile(0.5, w) == 4.0);
    CHECK(squared_quantile(0.25, w) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(squared_quantile(1.0, w) == 9.0);
    CHECK(squared_quantile(0.3, vec({-7})) == 49.0);
}

TEST_CASE("squared_quantile rejects bad input") {
    CHECK_THROWS_AS(squared_quantile(1.5, vec({1, 2})), std::invalid_argument);
    CHECK_THROWS_AS(squared_quantile(0.5, VectorXd()), std::invalid_argument);
    CHECK_THROWS_AS(squared_quantile(0.5, vec({1, std::nan("")})), std::invalid_argument);
}

TEST_CASE("squared_quantile matches the full-sort oracle on random vectors") {
    RandomSource rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index n = rng.uniform_int(1, 257);
        const VectorXd w = oracle::random_weights(rng, n);
        // achievable fraction: exact
        const Index k = n == 1 ? 0 : rng.uniform_int(0, n - 1);
        const double p_exact = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
        REQUIRE(squared_quantile(p_exact, w) == oracle::sort_quantile(p_exact, w));
        // arbitrary fraction: interpolated
        const double p = rng.uniform();
        const double expect = oracle::sort_quantile(p, w);
        REQUIRE(std::abs(squared_quantile(p, w) - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("squared_quantile is monotone in p with min/max endpoints") {
    RandomSource rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const VectorXd w = oracle::random_weights(rng, rng.uniform_int(1, 40));
        double prev = squared_quantile(0.0, w);
        CHECK(prev == w.array().square().minCoeff());
        for (int s = 1; s <= 100; ++s) {
            const double q = squared_quantile(s / 100.0, w);
            REQUIRE(q >= prev);
            prev = q;
        }
        CHECK(prev == w.array().square().maxCoeff());
    }
}

TEST_CASE("neighbourhood_rms examples") {
    CHECK(neighbourhood_rms(vec({3, 4}), Partition(2, {{0, 1}}))[0] == doctest::Approx(std::sqrt(12.5)));
    const VectorXd r = neighbourhood_rms(vec({1, 1, 3, 3}), Partition(4, {{0, 1}, {2, 3}}));
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 3.0);
    const VectorXd c = neighbourhood_rms(VectorXd(VectorXd::Constant(6, -0.4)), Partition::contiguous(6, 4));
    CHECK(c[0] == doctest::Approx(0.4));
    CHECK(c[1] == doctest::Approx(0.4));
}

TEST_CASE("partition validation") {
    CHECK_THROWS_AS(Partition(3, {{0, 1}}), std::invalid_argument);          // gap
    CHECK_THROWS_AS(Partition(3, {{0, 1}, {1, 2}}), std::invalid_argument);  // overlap
    CHECK_THROWS_AS(Partition(2, {{0, 1}, {}}), std::invalid_argument);      // empty
    CHECK_THROWS_AS(Partition(2, {{0, 2}}), std::invalid_argument);          // range
    const Partition p(4, {{3, 0}, {1}, {2}});
    CHECK(p.group_of(0) == 0);
    CHECK(p.group_of(2) == 2);
    CHECK(p.max_group_size() == 2);
}

TEST_CASE("converged_mask_unstructured examples") {
    CHECK(converged_mask_unstructured(0.5, vec({0.1, -2, 0.5, 1})) == mask({-1, 1, -1, 1}));
    CHECK(converged_mask_unstructured(0.0, vec({0.1, -2, 0.5})) == all_kept(3));
    CHECK(converged_mask_unstructured(1.0, vec({0.1, -2, 0.5})) == all_pruned(3));
    // ties: lowest index first
    CHECK(converged_mask_unstructured(0.5, vec({1, -1, 1, 1})) == mask({-1, -1, 1, 1}));
}

TEST_CASE("non-achievable fractions warn and use the nearest count") {
    g_warnings.clear();
    set_warning_sink(capture);
    const PruneMask x = converged_mask_unstructured(0.3, vec({1, 2, 3, 4}));
    reset_warning_sink();
    CHECK(pruned_fraction(x) == 0.25);
    CHECK(g_warnings.size() == 1);
}

TEST_CASE("converged_mask_unstructured minimizes pruned squared mass (exhaustive)") {
    RandomSource rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const Index n = rng.uniform_int(1, 16);
        const VectorXd w = oracle::random_weights(rng, n);
        const double p = static_cast<double>(rng.uniform_int(0, n)) / static_cast<double>(n);
        const PruneMask x = converged_mask_unstructured(p, w);
        const VectorXd w2 = w.array().square();
        const double got = w2.dot(x.cast<double>());
        const auto pruned = (x.array() == -1).count();
        double best = -1e300;
        for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
            if (std::popcount(s) != pruned) continue;
            best = std::max(best, w2.dot(oracle::mask_from_bits(s, n).cast<double>()));
        }
        // pruning the smallest magnitudes maximizes x.w^2 = kept - pruned mass
        REQUIRE(got == doctest::Approx(best).epsilon(1e-12));
        REQUIRE(pruned_fraction(x) == static_cast<double>(std::llround(p * n)) / n);
    }
}

TEST_CASE("pruned_fraction equals round(pN)/N for arbitrary p") {
    RandomSource rng(14);
    set_warning_sink([](const std::string&) {});
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = rng.uniform_int(1, 300);
        const double p = rng.uniform();
        const PruneMask x = converged_mask_unstructured(p, oracle::random_weights(rng, n));
        REQUIRE(pruned_fraction(x) == static_cast<double>(std::llround(p * static_cast<double>(n))) / static_cast<double>(n));
    }
    reset_warning_sink();
}

TEST_CASE("converged_mask_structured examples") {
    const Partition part(4, {{0, 1}, {2, 3}});
    CHECK(converged_mask_structured(0.5, vec({1, 1, 3, 3}), part) == mask({-1, -1, 1, 1}));
    CHECK(converged_mask_structured(0.0, vec({1, 1, 3, 3}), part) == all_kept(4));
    CHECK(converged_mask_structured(1.0, vec({1, 2, 3}), Partition(3, {{0, 1, 2}})) == all_pruned(3));
    // equal rms: lower group index pruned first
    CHECK(converged_mask_structured(0.5, vec({2, 2, -2, 2}), part) == mask({-1, -1, 1, 1}));
}

TEST_CASE("converged_mask_structured is uniform and optimal among structured masks (exhaustive)") {
    RandomSource rng(15);
    for (int trial = 0; trial < 60; ++trial) {
        const Index m = rng.uniform_int(1, 8);
        const Index size = rng.uniform_int(1, 3);
        const Index n = m * size;
        const Partition part = Partition::contiguous(n, size);
        const VectorXd w = oracle::random_weights(rng, n);
        const double p = static_cast<double>(rng.uniform_int(0, m)) / static_cast<double>(m);
        const PruneMask x = converged_mask_structured(p, w, part);
        REQUIRE(is_neighbourhood_uniform(x, part));
        REQUIRE(pruned_fraction(x) == doctest::Approx(p));
        const VectorXd w2 = w.array().square();
        const auto pruned_groups = std::llround(p * static_cast<double>(m));
        double best = -1e300;
        for (std::uint64_t s = 0; s < (std::uint64_t{1} << m); ++s) {
            if (std::popcount(s) != pruned_groups) continue;
            PruneMask cand(n);
            for (Index k = 0; k < m; ++k) {
                for (Index i : part.group(k)) cand[i] = (s >> k) & 1U ? -1 : 1;
            }
            best = std::max(best, w2.dot(cand.cast<double>()));
        }
        REQUIRE(w2.dot(x.cast<double>()) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("structured mask with unequal groups picks the nearest achievable fraction") {
    g_warnings.clear();
    set_warning_sink(capture);
    // rms order: group 1 (size 1), group 0 (size 3), group 2 (size 2); target 0.5 * 6 = 3
    const Partition part(6, {{0, 1, 2}, {3}, {4, 5}});
    const PruneMask x = converged_mask_structured(0.5, vec({1, 1, 1, 0.1, 5, 5}), part);
    reset_warning_sink();
    CHECK(x == mask({-1, -1, -1, -1, 1, 1}));  // cumulative sizes 1, 4, 6; 4 is nearest to 3
    CHECK(g_warnings.size() == 1);
}

TEST_CASE("apply_mask") {
    const VectorXd w = vec({2, 3});
    CHECK(apply_mask(w, all_kept(2)) == w);
    CHECK(apply_mask(w, all_pruned(2)) == VectorXd::Zero(2));
    CHECK(apply_mask(w, mask({-1, 1})) == vec({0, 3}));
    CHECK_THROWS_AS(apply_mask(w, all_kept(3)), std::invalid_argument);

    RandomSource rng(16);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = rng.uniform_int(1, 50);
        const VectorXd v = oracle::random_weights(rng, n);
        const PruneMask x = oracle::mask_from_bits(rng(), n);
        const VectorXd once = apply_mask(v, x);
        REQUIRE(apply_mask(once, x) == once);
    }
}

TEST_CASE("pruned_fraction and mask_agreement") {
    CHECK(pruned_fraction(mask({-1, -1, 1, 1})) == 0.5);
    CHECK(pruned_fraction(all_kept(5)) == 0.0);
    CHECK(pruned_fraction(all_pruned(5)) == 1.0);
    CHECK(mask_agreement(mask({-1, 1, 1}), mask({-1, 1, 1})) == 1.0);
    CHECK(mask_agreement(mask({-1, 1}), mask({1, -1})) == 0.0);
    CHECK(mask_agreement(mask({-1, 1, 1, 1}), all_kept(4)) == 0.75);
    CHECK_THROWS_AS(mask_agreement(all_kept(2), all_kept(3)), std::invalid_argument);
}

TEST_CASE("template works for float scalars") {
    Eigen::VectorXf w(3);
    w << 3.f, -1.f, 2.f;
    CHECK(squared_quantile(0.5, w) == 4.f);
    CHECK(converged_mask_unstructured(1.0 / 3.0, w) == mask({1, -1, 1}));
}
