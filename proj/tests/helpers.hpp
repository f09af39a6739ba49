#pragma once

#include <string>

#include "mfe/scenario.hpp"

namespace mfe::testing {

inline AgentSpec agent(std::string id, Role role, std::int64_t stock = 0, Rational gain = Rational(0),
                       double mean = 0.25) {
    AgentSpec a;
    a.id = std::move(id);
    a.role = role;
    a.stock = Money(stock);
    a.gain = gain;
    a.mean_interval = mean;
    return a;
}

inline ChannelSpec channel(std::string id, std::string source, std::string sink, std::int64_t rate,
                           bool adjustable = false, Rational multiplier = Rational(1), std::string tag = {}) {
    ChannelSpec c;
    c.id = std::move(id);
    c.source = std::move(source);
    c.sink = std::move(sink);
    c.rate = Money(rate);
    c.multiplier = multiplier;
    c.adjustable = adjustable;
    c.tag = std::move(tag);
    return c;
}

/// Central bank plus a (100) and b (50), one channel a -> b at 10 per term.
inline ScenarioSpec pair_spec() {
    ScenarioSpec s;
    s.name = "pair";
    s.seed = 7;
    s.agents = {agent("cb", Role::CentralBank), agent("a", Role::HouseholdSector, 100),
                agent("b", Role::CorporateSector, 50)};
    s.channels = {channel("ab", "a", "b", 10)};
    return s;
}

/// The two-agent kernel: a -> b at 10, b -> a at 8, both adjustable, gain 1.
/// The central bank is isolated and never trades.
inline ScenarioSpec kernel_spec(Rational gain = Rational(1), std::uint64_t seed = 1) {
    ScenarioSpec s;
    s.name = "kernel";
    s.seed = seed;
    s.agents = {agent("cb", Role::CentralBank, 0, Rational(0), 1.0), agent("a", Role::Custom, 100, gain),
                agent("b", Role::Custom, 100, gain)};
    s.channels = {channel("ab", "a", "b", 10, true), channel("ba", "b", "a", 8, true)};
    s.figures = {{"flow_ab", FigureKind::ChannelFlow, "ab"}, {"flow_ba", FigureKind::ChannelFlow, "ba"}};
    return s;
}

inline std::string source_path(const std::string& rel) { return std::string(MFE_SOURCE_DIR) + "/" + rel; }

}  // namespace mfe::testing
