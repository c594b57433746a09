#include <doctest.h>

#include <gibbs/random.hpp>
#include <gibbs/schedules.hpp>

#include <cmath>
#include <stdexcept>

using namespace gibbs;

TEST_CASE("default beta schedule") {
    const BetaSchedule s;
    CHECK(beta_at(s, 0) == 0.7);
    CHECK(beta_at(s, 128) == 1e4);
    CHECK(beta_at(s, 199) == 1e4);
    CHECK(beta_at(s, 64) == doctest::Approx(std::sqrt(0.7 * 1e4)).epsilon(1e-12));
    CHECK(beta_at(s, 64) == doctest::Approx(83.666).epsilon(1e-5));
}

TEST_CASE("linear beta schedule") {
    BetaSchedule s{.beta_start = 1, .beta_end = 11, .anneal_epochs = 10, .mode = AnnealMode::Linear};
    CHECK(beta_at(s, 0) == 1);
    CHECK(beta_at(s, 5) == 6);
    CHECK(beta_at(s, 50) == 11);
}

TEST_CASE("default learning-rate schedule") {
    const LrSchedule s;
    CHECK(lr_at(s, 0) == 1e-3);
    CHECK(lr_at(s, 79) == 1e-3);
    CHECK(lr_at(s, 80) == doctest::Approx(1e-4).epsilon(1e-14));
    CHECK(lr_at(s, 119) == doctest::Approx(1e-4).epsilon(1e-14));
    CHECK(lr_at(s, 120) == doctest::Approx(1e-5).epsilon(1e-14));
    CHECK(lr_at(s, 160) == doctest::Approx(1e-6).epsilon(1e-14));
}

TEST_CASE("stretching") {
    const BetaSchedule b;
    CHECK(beta_at(stretched(b, 1), 77) == beta_at(b, 77));
    CHECK(beta_at(stretched(b, 2), 3) == beta_at(b, 1));
    const BetaSchedule b4 = stretched(b, 4);
    CHECK(beta_at(b4, 511) < 1e4);
    CHECK(beta_at(b4, 512) == 1e4);
    CHECK_THROWS_AS(stretched(b, 0), std::invalid_argument);

    RandomSource rng(51);
    const LrSchedule l;
    for (int t = 0; t < 1000; ++t) {
        const int s = static_cast<int>(rng.uniform_int(1, 16));
        const std::int64_t n = rng.uniform_int(0, 5000);
        REQUIRE(beta_at(stretched(b, s), n) == beta_at(b, n / s));
        REQUIRE(lr_at(stretched(l, s), n) == lr_at(l, n / s));
    }
}

TEST_CASE("monotonicity") {
    for (int s = 1; s <= 3; ++s) {
        const BetaSchedule b = stretched(BetaSchedule{}, s);
        const LrSchedule l = stretched(LrSchedule{}, s);
        for (int n = 1; n < 700; ++n) {
            REQUIRE(beta_at(b, n) >= beta_at(b, n - 1));
            REQUIRE(lr_at(l, n) <= lr_at(l, n - 1));
        }
        REQUIRE(beta_at(b, 128 * s) == b.beta_end);
    }
}

TEST_CASE("validation") {
    CHECK_THROWS(BetaSchedule{.beta_start = 2, .beta_end = 1}.validate());
    CHECK_THROWS(BetaSchedule{.anneal_epochs = 0}.validate());
    CHECK_THROWS(LrSchedule{.initial_lr = -1}.validate());
    CHECK_THROWS(beta_at(BetaSchedule{}, -1));
    CHECK_NOTHROW(BetaSchedule{}.validate());
}
