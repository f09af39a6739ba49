#pragma once

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include "mfe/money.hpp"

namespace mfe {

/// Exact rational number with 64-bit numerator and positive 64-bit denominator,
/// always kept in lowest terms. Intermediates use 128-bit arithmetic; a result
/// that does not fit back into 64 bits throws OverflowError.
class Rational {
public:
    constexpr Rational() = default;
    constexpr Rational(std::int64_t n) : num_(n) {}  // NOLINT(google-explicit-constructor)
    Rational(std::int64_t n, std::int64_t d);
    explicit Rational(Money m) : num_(m.units()) {}

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }

    bool is_zero() const noexcept { return num_ == 0; }
    bool is_integer() const noexcept { return den_ == 1; }
    int sign() const noexcept { return (num_ > 0) - (num_ < 0); }

    /// Rounds toward negative infinity.
    std::int64_t floor() const;
    /// Rounds toward zero.
    std::int64_t trunc() const noexcept { return num_ / den_; }
    double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

    Rational abs() const { return num_ < 0 ? -*this : *this; }

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    Rational operator-() const;
    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }

    friend bool operator==(const Rational& a, const Rational& b) = default;
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

    /// Parses "3", "-0.25", "1e-3" is not accepted; "7/20" is.
    static Rational parse(std::string_view text);

    /// Exact decimal when the denominator has only factors 2 and 5 ("0.05",
    /// "-12"), otherwise "p/q".
    std::string to_string() const;

    friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

private:
    static Rational from_wide(__int128 n, __int128 d);

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

}  // namespace mfe
