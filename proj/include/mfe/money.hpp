#pragma once

#include <compare>
#include <cstdint>
#include <ostream>

#include "mfe/error.hpp"

namespace mfe {

/// Exact signed count of minor currency units. Overflow throws.
class Money {
public:
    constexpr Money() = default;
    constexpr explicit Money(std::int64_t units) : units_(units) {}

    constexpr std::int64_t units() const noexcept { return units_; }

    friend Money operator+(Money a, Money b) {
        std::int64_t r;
        if (__builtin_add_overflow(a.units_, b.units_, &r)) throw OverflowError("Money: addition overflow");
        return Money(r);
    }
    friend Money operator-(Money a, Money b) {
        std::int64_t r;
        if (__builtin_sub_overflow(a.units_, b.units_, &r)) throw OverflowError("Money: subtraction overflow");
        return Money(r);
    }
    friend Money operator*(Money a, std::int64_t k) {
        std::int64_t r;
        if (__builtin_mul_overflow(a.units_, k, &r)) throw OverflowError("Money: multiplication overflow");
        return Money(r);
    }
    Money operator-() const { return Money(0) - *this; }
    Money& operator+=(Money o) { return *this = *this + o; }
    Money& operator-=(Money o) { return *this = *this - o; }

    friend constexpr auto operator<=>(Money, Money) = default;

    friend std::ostream& operator<<(std::ostream& os, Money m) { return os << m.units_; }

private:
    std::int64_t units_ = 0;
};

}  // namespace mfe
