#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mfe/event_log.hpp"
#include "mfe/network.hpp"

namespace mfe {

/// What one agent knows about its incident channels: its own outgoing rates
/// exactly, every incoming rate only as of the last mutual settlement.
struct BilateralView {
    struct Entry {
        std::size_t channel = 0;
        std::size_t partner = 0;
        bool outgoing = false;
        bool adjustable = false;
        Rational rate;     ///< observed effective rate
        Money base_rate;   ///< true base rate; only meaningful for outgoing entries
        SimTime settled_at;
    };

    std::size_t agent = 0;
    std::vector<Entry> entries;
    Money windfall{0};

    Rational outflow() const;
    Rational inflow() const;
    /// Observed outflow minus observed inflow, less any unabsorbed windfall.
    Rational deficit() const;
};

/// Rate changes an agent decides on at one event.
struct AdjustmentSet {
    struct Delta {
        std::size_t channel = 0;
        Money delta;
    };
    std::vector<Delta> deltas;  ///< one per adjustable outgoing channel, view order
    Rational deficit;           ///< d as observed
    Rational target;            ///< -gain * d
    Rational residual;          ///< target - sum(deltas)

    Money total() const;
};

struct NextEvent {
    std::size_t agent = 0;
    SimTime time;
};

/// Earliest pending agent event; ties go to the lexicographically smallest id.
NextEvent next_event(const NetworkState& state);

BilateralView observe(const NetworkState& state, std::size_t agent);
BilateralView observe(const NetworkState& state, const std::string& agent_id);

/// The continuity correction: total -gain*d split over adjustable outgoing
/// channels in proportion to their observed rates (equal split if all are
/// zero), integer deltas by largest remainder, clamped so no rate goes
/// negative. Whatever cannot be allocated lands in the residual.
AdjustmentSet equilibrate(const BilateralView& view, const Rational& gain);

/// Mutual settlement between two agents: every channel between them transfers
/// its accrued flow (rounded toward zero, remainder carried) and both sides'
/// snapshots take the current true rates.
void settle(NetworkState& state, std::size_t a, std::size_t b, SimTime time, EventLog& log, bool observer = false);
void settle(NetworkState& state, const std::string& a, const std::string& b, SimTime time, EventLog& log);

/// One agent event for `agent` at `time`: observe, equilibrate, settle with
/// each partner whose channel changes, then apply the new rates. The
/// CentralBank instead executes due issuance. Does not touch the agent's
/// event clock; step() does that.
AdjustmentSet agent_update(NetworkState& state, std::size_t agent, SimTime time, EventLog& log);

/// One-off redistribution from `counterparty` to `agent`, registered with
/// both as an unabsorbed windfall.
void inject_shock(NetworkState& state, const std::string& agent, const std::string& counterparty, Money amount,
                  SimTime time, EventLog& log);

/// Time of the next occurrence of any kind (boundary, schedule, agent).
SimTime next_occurrence(const NetworkState& state);

/// Processes the next occurrence. On equal times: term boundary, then
/// scheduled items, then agent events.
void step(NetworkState& state, EventLog& log);

/// Steps until every occurrence at or before now + horizon is processed;
/// leaves now = old now + horizon.
EventLog run(NetworkState& state, SimTime horizon);
void run(NetworkState& state, SimTime horizon, EventLog& log);

}  // namespace mfe
