#include <doctest.h>

#include <limits>
#include <set>

#include "mfe/error.hpp"
#include "mfe/money.hpp"
#include "mfe/philox.hpp"
#include "mfe/rational.hpp"
#include "mfe/sim_time.hpp"

using namespace mfe;

TEST_CASE("money arithmetic is exact and overflow is an error") {
    CHECK(Money(7) + Money(5) == Money(12));
    CHECK(Money(7) - Money(12) == Money(-5));
    CHECK(Money(-3) * 4 == Money(-12));
    const Money big(std::numeric_limits<std::int64_t>::max());
    CHECK_THROWS_AS(big + Money(1), OverflowError);
    CHECK_THROWS_AS(-big - Money(2), OverflowError);
    CHECK_THROWS_AS(big * 2, OverflowError);
}

TEST_CASE("rational normalization and arithmetic") {
    CHECK(Rational(2, 4) == Rational(1, 2));
    CHECK(Rational(3, -6) == Rational(-1, 2));
    CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
    CHECK(Rational(1, 3) * Rational(3) == Rational(1));
    CHECK(Rational(7, 2).floor() == 3);
    CHECK(Rational(-7, 2).floor() == -4);
    CHECK(Rational(-7, 2).trunc() == -3);
    CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
    const std::int64_t m = std::numeric_limits<std::int64_t>::max();
    CHECK_THROWS_AS(Rational(m) + Rational(1), OverflowError);
    CHECK(Rational(m, 3) * Rational(3, m) == Rational(1));  // wide intermediates
}

TEST_CASE("rational text form") {
    CHECK(Rational(1, 20).to_string() == "0.05");
    CHECK(Rational(-5, 2).to_string() == "-2.5");
    CHECK(Rational(3).to_string() == "3");
    CHECK(Rational(1, 3).to_string() == "1/3");
    CHECK(Rational::parse("0.24") == Rational(6, 25));
    CHECK(Rational::parse("7/20") == Rational(7, 20));
    CHECK(Rational::parse("-12") == Rational(-12));
    for (auto r : {Rational(3, 40), Rational(-1, 7), Rational(123456789, 1024), Rational(0)})
        CHECK(Rational::parse(r.to_string()) == r);
    CHECK_THROWS(Rational::parse("abc"));
    CHECK_THROWS(Rational::parse("1/0"));
}

TEST_CASE("simulated time is fixed point") {
    CHECK(SimTime::terms(2).ticks() == 2 * SimTime::kTicksPerTerm);
    CHECK(SimTime::from_terms(0.25).ticks() == SimTime::kTicksPerTerm / 4);
    CHECK(SimTime::from_terms(0.25).as_terms() == Rational(1, 4));
    CHECK(SimTime::terms(1) + SimTime::terms(2) == SimTime::terms(3));
}

TEST_CASE("philox4x32-10 known answers") {
    using C = Philox4x32::Counter;
    CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter rng draws are keyed, not sequenced") {
    CounterRng a(42, "stream"), b(42, "stream"), c(43, "stream"), d(42, "other");
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
    CHECK(a.block(7) == CounterRng(42, "stream").block(7));

    CounterRng u(1, "uniform");
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const double v = u.uniform();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        const auto k = u.uniform_int(-3, 3);
        CHECK(k >= -3);
        CHECK(k <= 3);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
