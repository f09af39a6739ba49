#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfe/event_log.hpp"
#include "mfe/money.hpp"
#include "mfe/rational.hpp"
#include "mfe/scenario.hpp"
#include "mfe/sim_time.hpp"

namespace mfe {

struct Agent {
    std::string id;
    Role role = Role::Custom;
    std::string label;
    Money stock{0};
    bool continuity_exempt = false;
    Rational gain{0};
    SimTime local_time;
    double mean_interval = 0.25;

    std::uint64_t event_index = 0;  ///< own events fired so far
    SimTime next_event;             ///< scheduled time of own next event
    Rational residual{0};           ///< unallocatable correction from the last equilibration
    Money windfall{0};              ///< one-off shock amount not yet absorbed
};

struct Channel {
    std::string id;
    std::size_t source = 0;
    std::size_t sink = 0;
    Money rate{0};
    Rational multiplier{1};
    bool adjustable = false;
    std::string tag;

    /// Effective rates as each endpoint last saw them at a mutual settlement.
    Rational last_settled_rate_at_source;
    Rational last_settled_rate_at_sink;
    SimTime last_settled_time_at_source;
    SimTime last_settled_time_at_sink;

    /// Flow accrued since the last settlement, in money (fractional part carried).
    Rational accrued{0};
    SimTime accrued_until;

    Rational effective_rate() const { return Rational(rate) * multiplier; }
};

/// Scheduled occurrences that fire at exact times (policy and shocks).
struct ScheduledItem {
    enum class Kind { Multiplier, Gain, Shock };
    SimTime time;
    Kind kind = Kind::Multiplier;
    std::size_t index = 0;  ///< into the matching list below
};

/// The whole simulated economy. A plain value: copy it to branch a run.
struct NetworkState {
    std::vector<Agent> agents;
    std::vector<Channel> channels;
    Money cumulative_issuance{0};
    std::uint64_t seed = 0;
    SimTime now;

    SimTime term_length = SimTime::terms(1);
    std::int64_t closed_terms = 0;  ///< boundaries processed; also the open term index
    std::string fingerprint;

    Money initial_total_stock{0};
    std::vector<Money> initial_stocks;
    Aggregates initial_aggregates;

    Money securities_outstanding{0};
    std::vector<Money> term_flow;  ///< per channel, settled in the open term

    std::vector<FigureSpec> figures;

    std::vector<IssuanceItem> issuance;  ///< sorted by time
    std::size_t issuance_cursor = 0;
    std::vector<MultiplierSetting> multiplier_settings;
    std::vector<GainSetting> gain_settings;
    std::vector<ShockSpec> shocks;
    std::vector<ScheduledItem> schedule;  ///< sorted by (time, kind, index)
    std::size_t schedule_cursor = 0;

    std::size_t agent_index(const std::string& id) const;
    std::size_t channel_index(const std::string& id) const;
    std::optional<std::size_t> central_bank() const;
    Money total_stock() const;

    std::map<std::string, std::size_t> agent_lookup;
    std::map<std::string, std::size_t> channel_lookup;
};

/// Validates the scenario and builds the time-0 state. Snapshots equal the
/// true rates; cumulative issuance is zero.
NetworkState build_network(const ScenarioSpec& spec);

/// Adds policy items and shocks to a state that has not yet passed their times.
void add_schedule(NetworkState& state, const PolicySchedule& policy, const std::vector<ShockSpec>& shocks);

/// Moves `amount` along the channel from source to sink and marks a mutual
/// settlement at `time` (both snapshots take the current effective rate).
void transfer(NetworkState& state, const std::string& channel_id, Money amount, SimTime time, EventLog& log);

/// CentralBank issuance (negative = retirement). Outstanding notes never go below zero.
void issue(NetworkState& state, const std::string& agent_id, Money amount, EventLog& log);
void issue(NetworkState& state, Money amount, EventLog& log);

Money notes_outstanding(const NetworkState& state);

/// Settled inflow minus settled outflow touching the agent for events with
/// from <= time < to (events at exactly `to` are excluded).
Money local_imbalance(const NetworkState& state, const EventLog& log, const std::string& agent_id, SimTime from,
                      SimTime to);

/// True (not observed) inflow minus outflow rate of an agent.
Rational true_imbalance(const NetworkState& state, std::size_t agent);

/// Sum of true imbalances over all agents; zero by construction.
Rational closed_flow_sum(const NetworkState& state);

/// Aggregates at the current instant.
Aggregates current_aggregates(const NetworkState& state);

/// Values of the scenario's user figures at the current instant.
std::vector<Rational> current_figures(const NetworkState& state);

// Internal bookkeeping shared by the engine.
namespace detail {
void move_money(NetworkState& state, std::size_t from, std::size_t to, Money amount);
void book_channel_flow(NetworkState& state, std::size_t channel, Money amount);
void accrue(Channel& c, SimTime t);
/// Exponential waiting time keyed by (seed, agent id, event index); at least one tick.
SimTime waiting_time(std::uint64_t seed, const std::string& agent_id, std::uint64_t event_index, double mean_terms);
}  // namespace detail

}  // namespace mfe
