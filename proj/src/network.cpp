#include "mfe/network.hpp"

#include <algorithm>
#include <cmath>

#include "mfe/philox.hpp"

namespace mfe {

std::size_t NetworkState::agent_index(const std::string& id) const {
    auto it = agent_lookup.find(id);
    if (it == agent_lookup.end()) throw UnknownIdError("unknown agent '" + id + "'");
    return it->second;
}

std::size_t NetworkState::channel_index(const std::string& id) const {
    auto it = channel_lookup.find(id);
    if (it == channel_lookup.end()) throw UnknownIdError("unknown channel '" + id + "'");
    return it->second;
}

std::optional<std::size_t> NetworkState::central_bank() const {
    for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i].continuity_exempt) return i;
    return std::nullopt;
}

Money NetworkState::total_stock() const {
    Money t{0};
    for (const auto& a : agents) t += a.stock;
    return t;
}

namespace detail {

void move_money(NetworkState& state, std::size_t from, std::size_t to, Money amount) {
    state.agents[from].stock -= amount;
    state.agents[to].stock += amount;
}

void book_channel_flow(NetworkState& state, std::size_t channel, Money amount) {
    state.term_flow[channel] += amount;
    const std::string& tag = state.channels[channel].tag;
    if (tag == "bond")
        state.securities_outstanding += amount;
    else if (tag == "redemption")
        state.securities_outstanding -= amount;
}

void accrue(Channel& c, SimTime t) {
    if (t <= c.accrued_until) return;
    const Rational elapsed((t - c.accrued_until).ticks(), SimTime::kTicksPerTerm);
    c.accrued += c.effective_rate() * elapsed;
    c.accrued_until = t;
}

SimTime waiting_time(std::uint64_t seed, const std::string& agent_id, std::uint64_t event_index, double mean_terms) {
    CounterRng rng(seed, fnv1a64(agent_id, fnv1a64("event/")));
    auto b = rng.block(event_index);
    const double u = CounterRng::to_open_unit((static_cast<std::uint64_t>(b[1]) << 32) | b[0]);
    const double w = -mean_terms * std::log(u);
    const auto ticks = std::llround(w * static_cast<double>(SimTime::kTicksPerTerm));
    return SimTime::from_ticks(std::max<long long>(1, ticks));
}

}  // namespace detail

namespace {

void rebuild_schedule(NetworkState& s) {
    std::vector<ScheduledItem> items;
    for (std::size_t i = 0; i < s.multiplier_settings.size(); ++i)
        items.push_back({s.multiplier_settings[i].time, ScheduledItem::Kind::Multiplier, i});
    for (std::size_t i = 0; i < s.gain_settings.size(); ++i)
        items.push_back({s.gain_settings[i].time, ScheduledItem::Kind::Gain, i});
    for (std::size_t i = 0; i < s.shocks.size(); ++i) items.push_back({s.shocks[i].time, ScheduledItem::Kind::Shock, i});
    std::stable_sort(items.begin(), items.end(), [](const ScheduledItem& a, const ScheduledItem& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.index < b.index;
    });
    // Items already fired stay fired: count those strictly before now.
    s.schedule = std::move(items);
    s.schedule_cursor = 0;
    while (s.schedule_cursor < s.schedule.size() && s.schedule[s.schedule_cursor].time < s.now) ++s.schedule_cursor;
    std::stable_sort(s.issuance.begin() + static_cast<std::ptrdiff_t>(s.issuance_cursor), s.issuance.end(),
                     [](const IssuanceItem& a, const IssuanceItem& b) { return a.time < b.time; });
}

}  // namespace

void add_schedule(NetworkState& state, const PolicySchedule& policy, const std::vector<ShockSpec>& shocks) {
    for (const auto& m : policy.multipliers) {
        if (m.time < state.now) throw ValidationError("multiplier setting scheduled in the past");
        state.channel_index(m.channel);
        if (m.multiplier < Rational(0)) throw ValidationError("negative multiplier for channel '" + m.channel + "'");
        state.multiplier_settings.push_back(m);
    }
    for (const auto& g : policy.gains) {
        if (g.time < state.now) throw ValidationError("gain setting scheduled in the past");
        state.agent_index(g.agent);
        if (g.gain < Rational(0)) throw ValidationError("negative gain for agent '" + g.agent + "'");
        state.gain_settings.push_back(g);
    }
    for (const auto& i : policy.issuance) {
        if (i.time < state.now) throw ValidationError("issuance scheduled in the past");
        state.issuance.push_back(i);
    }
    for (const auto& sh : shocks) {
        if (sh.time < state.now) throw ValidationError("shock scheduled in the past");
        state.agent_index(sh.agent);
        state.agent_index(sh.counterparty);
        if (sh.agent == sh.counterparty) throw ValidationError("shock agent and counterparty must differ");
        state.shocks.push_back(sh);
    }
    rebuild_schedule(state);
}

NetworkState build_network(const ScenarioSpec& spec) {
    NetworkState s;
    s.seed = spec.seed;
    s.term_length = spec.term_length;
    if (s.term_length.ticks() <= 0) throw ValidationError("term length must be positive");
    s.fingerprint = spec.fingerprint();

    std::size_t central_banks = 0;
    for (const auto& as : spec.agents) {
        if (as.id.empty()) throw ValidationError("agent with empty id");
        if (!s.agent_lookup.emplace(as.id, s.agents.size()).second)
            throw ValidationError("duplicate agent id '" + as.id + "'");
        if (as.gain < Rational(0)) throw ValidationError("agent '" + as.id + "': negative gain");
        if (!(as.mean_interval > 0.0) || !std::isfinite(as.mean_interval))
            throw ValidationError("agent '" + as.id + "': mean_interval must be positive");
        Agent a;
        a.id = as.id;
        a.role = as.role;
        a.label = as.label;
        a.stock = as.stock;
        a.gain = as.gain;
        a.mean_interval = as.mean_interval;
        a.continuity_exempt = as.role == Role::CentralBank;
        if (a.continuity_exempt) ++central_banks;
        a.next_event = detail::waiting_time(s.seed, a.id, 0, a.mean_interval);
        s.agents.push_back(std::move(a));
    }
    if (central_banks == 0) throw ValidationError("network has no CentralBank agent");
    if (central_banks > 1) throw ValidationError("network has more than one CentralBank agent");

    for (const auto& cs : spec.channels) {
        if (cs.id.empty()) throw ValidationError("channel with empty id");
        if (!s.channel_lookup.emplace(cs.id, s.channels.size()).second)
            throw ValidationError("duplicate channel id '" + cs.id + "'");
        auto endpoint = [&](const std::string& id, const char* which) {
            auto it = s.agent_lookup.find(id);
            if (it == s.agent_lookup.end())
                throw ValidationError("channel '" + cs.id + "': unknown " + which + " agent '" + id + "'");
            return it->second;
        };
        Channel c;
        c.id = cs.id;
        c.source = endpoint(cs.source, "source");
        c.sink = endpoint(cs.sink, "sink");
        if (c.source == c.sink) throw ValidationError("channel '" + cs.id + "': self-loop (source = sink)");
        if (cs.rate < Money(0)) throw ValidationError("channel '" + cs.id + "': negative rate");
        if (cs.multiplier < Rational(0)) throw ValidationError("channel '" + cs.id + "': negative multiplier");
        c.rate = cs.rate;
        c.multiplier = cs.multiplier;
        c.adjustable = cs.adjustable;
        c.tag = cs.tag;
        c.last_settled_rate_at_source = c.effective_rate();
        c.last_settled_rate_at_sink = c.effective_rate();
        s.channels.push_back(std::move(c));
    }
    s.term_flow.assign(s.channels.size(), Money(0));

    for (const auto& f : spec.figures) {
        if (f.kind == FigureKind::Stock)
            s.agent_index(f.ref);
        else if (!s.channel_lookup.count(f.ref))
            throw ValidationError("figure '" + f.name + "': unknown channel '" + f.ref + "'");
    }
    s.figures = spec.figures;

    s.securities_outstanding = spec.initial_securities;
    s.initial_total_stock = s.total_stock();
    for (const auto& a : s.agents) s.initial_stocks.push_back(a.stock);
    s.initial_aggregates = current_aggregates(s);

    add_schedule(s, spec.policy, spec.shocks);
    return s;
}

void transfer(NetworkState& state, const std::string& channel_id, Money amount, SimTime time, EventLog& log) {
    const std::size_t ci = state.channel_index(channel_id);
    if (amount < Money(0)) throw ValidationError("transfer amount must be non-negative");
    Channel& c = state.channels[ci];
    detail::move_money(state, c.source, c.sink, amount);
    detail::book_channel_flow(state, ci, amount);
    const Rational eff = c.effective_rate();
    c.last_settled_rate_at_source = eff;
    c.last_settled_rate_at_sink = eff;
    c.last_settled_time_at_source = time;
    c.last_settled_time_at_sink = time;
    log.push_back(Event{time, state.closed_terms, TransferEvent{c.id, amount}});
}

void issue(NetworkState& state, const std::string& agent_id, Money amount, EventLog& log) {
    const std::size_t ai = state.agent_index(agent_id);
    Agent& a = state.agents[ai];
    if (!a.continuity_exempt) throw ValidationError("issuance by non-exempt agent '" + agent_id + "'");
    const Money after = state.cumulative_issuance + amount;
    if (after < Money(0)) throw ValidationError("retirement would drive notes outstanding below zero");
    a.stock += amount;
    state.cumulative_issuance = after;
    log.push_back(Event{state.now, state.closed_terms, IssueEvent{a.id, amount}});
}

void issue(NetworkState& state, Money amount, EventLog& log) {
    auto cb = state.central_bank();
    if (!cb) throw ValidationError("network has no CentralBank agent");
    issue(state, state.agents[*cb].id, amount, log);
}

Money notes_outstanding(const NetworkState& state) { return state.cumulative_issuance; }

Money local_imbalance(const NetworkState& state, const EventLog& log, const std::string& agent_id, SimTime from,
                      SimTime to) {
    const std::size_t ai = state.agent_index(agent_id);
    const std::string& id = state.agents[ai].id;
    Money net{0};
    auto channel_flow = [&](const std::string& ch, Money amount) {
        const Channel& c = state.channels[state.channel_index(ch)];
        if (c.sink == ai) net += amount;
        if (c.source == ai) net -= amount;
    };
    for (const Event& e : log) {
        if (e.time < from || e.time >= to) continue;
        if (auto* t = std::get_if<TransferEvent>(&e.payload))
            channel_flow(t->channel, t->amount);
        else if (auto* st = std::get_if<SettlementEvent>(&e.payload))
            channel_flow(st->channel, st->amount);
        else if (auto* sh = std::get_if<ShockEvent>(&e.payload)) {
            if (sh->agent == id) net += sh->amount;
            if (sh->counterparty == id) net -= sh->amount;
        }
    }
    return net;
}

Rational true_imbalance(const NetworkState& state, std::size_t agent) {
    Rational net{0};
    for (const auto& c : state.channels) {
        if (c.sink == agent) net += c.effective_rate();
        if (c.source == agent) net -= c.effective_rate();
    }
    return net;
}

Rational closed_flow_sum(const NetworkState& state) {
    Rational sum{0};
    for (std::size_t i = 0; i < state.agents.size(); ++i) sum += true_imbalance(state, i);
    return sum;
}

Aggregates current_aggregates(const NetworkState& state) {
    Aggregates a;
    a.notes_outstanding = state.cumulative_issuance;
    a.government_securities_outstanding = state.securities_outstanding;
    for (const auto& c : state.channels) {
        if (c.tag == "discount") {
            a.discount_rate = c.multiplier;
            break;
        }
    }
    for (const auto& c : state.channels) {
        if (c.tag == "interest") {
            a.securities_interest_rate = c.multiplier;
            break;
        }
    }
    return a;
}

std::vector<Rational> current_figures(const NetworkState& state) {
    std::vector<Rational> out;
    out.reserve(state.figures.size());
    for (const auto& f : state.figures) {
        switch (f.kind) {
            case FigureKind::Stock: out.emplace_back(state.agents[state.agent_index(f.ref)].stock); break;
            case FigureKind::ChannelFlow: out.emplace_back(state.term_flow[state.channel_index(f.ref)]); break;
            case FigureKind::ChannelRate: out.push_back(state.channels[state.channel_index(f.ref)].effective_rate()); break;
            case FigureKind::ChannelMultiplier: out.push_back(state.channels[state.channel_index(f.ref)].multiplier); break;
        }
    }
    return out;
}

}  // namespace mfe
