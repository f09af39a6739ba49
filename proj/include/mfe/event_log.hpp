#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "mfe/money.hpp"
#include "mfe/rational.hpp"
#include "mfe/sim_time.hpp"

namespace mfe {

/// The four observer figures snapshotted at every term boundary.
struct Aggregates {
    Money notes_outstanding{0};
    Money government_securities_outstanding{0};
    Rational discount_rate{0};
    Rational securities_interest_rate{0};

    friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

struct RateDelta {
    std::string channel;
    Money delta;
    friend bool operator==(const RateDelta&, const RateDelta&) = default;
};

/// An agent's own event: equilibration for ordinary agents, a schedule sweep
/// for the exempt CentralBank.
struct AgentUpdateEvent {
    std::string agent;
    bool exempt = false;
    Rational deficit;
    Rational target;
    Rational residual;
    std::vector<RateDelta> deltas;
    friend bool operator==(const AgentUpdateEvent&, const AgentUpdateEvent&) = default;
};

/// A direct transfer of a fixed amount along a channel.
struct TransferEvent {
    std::string channel;
    Money amount;
    friend bool operator==(const TransferEvent&, const TransferEvent&) = default;
};

/// Settlement of accrued flow on one channel. `observer` marks the forced
/// term-boundary settlements.
struct SettlementEvent {
    std::string channel;
    Money amount;
    bool observer = false;
    friend bool operator==(const SettlementEvent&, const SettlementEvent&) = default;
};

struct ShockEvent {
    std::string agent;
    std::string counterparty;
    Money amount;
    friend bool operator==(const ShockEvent&, const ShockEvent&) = default;
};

struct IssueEvent {
    std::string agent;
    Money amount;
    friend bool operator==(const IssueEvent&, const IssueEvent&) = default;
};

struct PolicyEvent {
    enum class Target { Multiplier, Gain };
    Target target = Target::Multiplier;
    std::string ref;  // channel id or agent id
    Rational value;
    friend bool operator==(const PolicyEvent&, const PolicyEvent&) = default;
};

/// The observer's term-end cut: stocks (network agent order), aggregates and
/// user figures (scenario figure order).
struct BoundaryEvent {
    std::vector<Money> stocks;
    Aggregates aggregates;
    std::vector<Rational> figures;
    friend bool operator==(const BoundaryEvent&, const BoundaryEvent&) = default;
};

enum class EventKind { AgentUpdate, Transfer, Settlement, Shock, Issue, Policy, Boundary };

std::string to_string(EventKind k);

struct Event {
    SimTime time;
    /// Accounting term the event is booked into.
    std::int64_t term = 0;
    std::variant<AgentUpdateEvent, TransferEvent, SettlementEvent, ShockEvent, IssueEvent, PolicyEvent, BoundaryEvent>
        payload;

    EventKind kind() const { return static_cast<EventKind>(payload.index()); }
    friend bool operator==(const Event&, const Event&) = default;
};

using EventLog = std::vector<Event>;

/// One JSON object per line, keys in fixed order.
void write_jsonl(std::ostream& out, const EventLog& log);
std::string to_jsonl(const EventLog& log);

}  // namespace mfe
