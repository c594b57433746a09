#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace gibbs {

/// Counter-based SplitMix64 stream.
///
/// Draw n of a stream with key k is mix(k + (n + 1) * golden), so any draw
/// can be computed independently of the others (`uniform_at`). That is what
/// makes parallel sampling produce the same masks as sequential sampling.
class RandomSource {
public:
    using result_type = std::uint64_t;

    explicit RandomSource(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return bits_at(counter_++); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return to_unit(operator()()); }

    /// Draw `index` of this stream without advancing it.
    result_type bits_at(std::uint64_t index) const { return mix(key_ + (index + 1) * kGolden); }
    double uniform_at(std::uint64_t index) const { return to_unit(bits_at(index)); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(operator()());
        // Lemire-style rejection keeps the draw unbiased.
        const std::uint64_t limit = max() - max() % span;
        std::uint64_t r;
        do {
            r = operator()();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Standard normal via Box-Muller (one value per two uniforms).
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double prob) { return uniform() < prob; }

    /// Independent child stream; consumes one draw of this stream.
    RandomSource split() { return from_key(mix(operator()() ^ 0xbb67ae8584caa73bULL)); }

    /// Child stream identified by `id`; does not advance this stream.
    RandomSource substream(std::uint64_t id) const {
        return from_key(mix(key_ ^ mix(id * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL)));
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }
    void skip(std::uint64_t n) { counter_ += n; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    static RandomSource from_key(std::uint64_t key) {
        RandomSource r;
        r.key_ = key;
        return r;
    }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace gibbs
