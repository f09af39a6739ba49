#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

#include "mfe/error.hpp"
#include "mfe/rational.hpp"

namespace mfe {

/// Simulated time in fixed-point ticks. One accounting term is kTicksPerTerm
/// ticks, so accruals (rate per term times elapsed ticks) stay exact.
class SimTime {
public:
    static constexpr std::int64_t kTicksPerTerm = 1'000'000;

    constexpr SimTime() = default;
    static constexpr SimTime from_ticks(std::int64_t t) { return SimTime(t); }
    static SimTime from_terms(double terms) {
        if (!std::isfinite(terms) || terms < 0.0) throw ValidationError("time must be finite and non-negative");
        return SimTime(std::llround(terms * static_cast<double>(kTicksPerTerm)));
    }
    static constexpr SimTime terms(std::int64_t n) { return SimTime(n * kTicksPerTerm); }

    constexpr std::int64_t ticks() const noexcept { return ticks_; }
    constexpr double to_terms() const noexcept {
        return static_cast<double>(ticks_) / static_cast<double>(kTicksPerTerm);
    }
    /// Exact value in terms.
    Rational as_terms() const { return Rational(ticks_, kTicksPerTerm); }

    friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime(a.ticks_ + b.ticks_); }
    friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime(a.ticks_ - b.ticks_); }
    friend constexpr auto operator<=>(SimTime, SimTime) = default;

private:
    constexpr explicit SimTime(std::int64_t t) : ticks_(t) {}
    std::int64_t ticks_ = 0;
};

}  // namespace mfe
