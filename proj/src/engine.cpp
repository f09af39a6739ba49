#include "mfe/engine.hpp"

#include <algorithm>
#include <numeric>

namespace mfe {

Rational BilateralView::outflow() const {
    Rational sum{0};
    for (const auto& e : entries)
        if (e.outgoing) sum += e.rate;
    return sum;
}

Rational BilateralView::inflow() const {
    Rational sum{0};
    for (const auto& e : entries)
        if (!e.outgoing) sum += e.rate;
    return sum;
}

Rational BilateralView::deficit() const { return outflow() - inflow() - Rational(windfall); }

Money AdjustmentSet::total() const {
    Money t{0};
    for (const auto& d : deltas) t += d.delta;
    return t;
}

NextEvent next_event(const NetworkState& state) {
    NextEvent best;
    bool found = false;
    for (std::size_t i = 0; i < state.agents.size(); ++i) {
        const Agent& a = state.agents[i];
        if (!found || a.next_event < best.time ||
            (a.next_event == best.time && a.id < state.agents[best.agent].id)) {
            best = {i, a.next_event};
            found = true;
        }
    }
    return best;
}

BilateralView observe(const NetworkState& state, std::size_t agent) {
    if (agent >= state.agents.size()) throw UnknownIdError("unknown agent index");
    BilateralView v;
    v.agent = agent;
    v.windfall = state.agents[agent].windfall;
    for (std::size_t ci = 0; ci < state.channels.size(); ++ci) {
        const Channel& c = state.channels[ci];
        if (c.source == agent) {
            v.entries.push_back({ci, c.sink, true, c.adjustable, c.effective_rate(), c.rate, c.last_settled_time_at_source});
        } else if (c.sink == agent) {
            v.entries.push_back(
                {ci, c.source, false, false, c.last_settled_rate_at_sink, Money(0), c.last_settled_time_at_sink});
        }
    }
    return v;
}

BilateralView observe(const NetworkState& state, const std::string& agent_id) {
    return observe(state, state.agent_index(agent_id));
}

AdjustmentSet equilibrate(const BilateralView& view, const Rational& gain) {
    if (gain < Rational(0)) throw ValidationError("gain must be non-negative");
    AdjustmentSet out;
    out.deficit = view.deficit();
    out.target = -(gain * out.deficit);

    std::vector<const BilateralView::Entry*> adjustable;
    for (const auto& e : view.entries)
        if (e.outgoing && e.adjustable) adjustable.push_back(&e);

    const std::int64_t whole = out.target.trunc();
    const std::int64_t magnitude = whole < 0 ? -whole : whole;
    const std::int64_t sign = whole < 0 ? -1 : 1;

    std::vector<std::int64_t> alloc(adjustable.size(), 0);
    if (!adjustable.empty() && magnitude > 0) {
        Rational weight_sum{0};
        for (const auto* e : adjustable) weight_sum += e->rate;

        std::vector<Rational> remainder(adjustable.size());
        std::int64_t assigned = 0;
        for (std::size_t i = 0; i < adjustable.size(); ++i) {
            const Rational quota = weight_sum.is_zero()
                                       ? Rational(magnitude, static_cast<std::int64_t>(adjustable.size()))
                                       : Rational(magnitude) * adjustable[i]->rate / weight_sum;
            alloc[i] = quota.floor();
            remainder[i] = quota - Rational(alloc[i]);
            assigned += alloc[i];
        }
        std::vector<std::size_t> order(adjustable.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::int64_t k = 0; k < magnitude - assigned; ++k) ++alloc[order[static_cast<std::size_t>(k)]];
    }

    Money allocated{0};
    for (std::size_t i = 0; i < adjustable.size(); ++i) {
        Money delta(sign * alloc[i]);
        if (delta < Money(0) && adjustable[i]->base_rate + delta < Money(0)) delta = -adjustable[i]->base_rate;
        out.deltas.push_back({adjustable[i]->channel, delta});
        allocated += delta;
    }
    out.residual = out.target - Rational(allocated);
    return out;
}

namespace {

void settle_channel(NetworkState& state, std::size_t ci, SimTime time, EventLog& log, bool observer) {
    Channel& c = state.channels[ci];
    detail::accrue(c, time);
    const Money amount(c.accrued.floor());
    c.accrued -= Rational(amount);
    detail::move_money(state, c.source, c.sink, amount);
    detail::book_channel_flow(state, ci, amount);
    const Rational eff = c.effective_rate();
    c.last_settled_rate_at_source = eff;
    c.last_settled_rate_at_sink = eff;
    c.last_settled_time_at_source = time;
    c.last_settled_time_at_sink = time;
    log.push_back(Event{time, state.closed_terms, SettlementEvent{c.id, amount, observer}});
}

SimTime next_boundary(const NetworkState& state) {
    return SimTime::from_ticks((state.closed_terms + 1) * state.term_length.ticks());
}

void close_term(NetworkState& state, EventLog& log) {
    const SimTime t = next_boundary(state);
    state.now = t;
    for (std::size_t ci = 0; ci < state.channels.size(); ++ci) settle_channel(state, ci, t, log, true);
    BoundaryEvent b;
    b.stocks.reserve(state.agents.size());
    for (const auto& a : state.agents) b.stocks.push_back(a.stock);
    b.aggregates = current_aggregates(state);
    b.figures = current_figures(state);
    log.push_back(Event{t, state.closed_terms, std::move(b)});
    ++state.closed_terms;
    std::fill(state.term_flow.begin(), state.term_flow.end(), Money(0));
}

void fire_scheduled(NetworkState& state, EventLog& log) {
    const ScheduledItem item = state.schedule[state.schedule_cursor++];
    state.now = item.time;
    switch (item.kind) {
        case ScheduledItem::Kind::Multiplier: {
            const MultiplierSetting& m = state.multiplier_settings[item.index];
            const std::size_t ci = state.channel_index(m.channel);
            settle_channel(state, ci, item.time, log, false);
            Channel& c = state.channels[ci];
            c.multiplier = m.multiplier;
            c.last_settled_rate_at_source = c.effective_rate();
            c.last_settled_rate_at_sink = c.effective_rate();
            log.push_back(Event{item.time, state.closed_terms,
                                PolicyEvent{PolicyEvent::Target::Multiplier, m.channel, m.multiplier}});
            break;
        }
        case ScheduledItem::Kind::Gain: {
            const GainSetting& g = state.gain_settings[item.index];
            state.agents[state.agent_index(g.agent)].gain = g.gain;
            log.push_back(Event{item.time, state.closed_terms, PolicyEvent{PolicyEvent::Target::Gain, g.agent, g.gain}});
            break;
        }
        case ScheduledItem::Kind::Shock: {
            const ShockSpec sh = state.shocks[item.index];
            inject_shock(state, sh.agent, sh.counterparty, sh.amount, item.time, log);
            break;
        }
    }
}

}  // namespace

void settle(NetworkState& state, std::size_t a, std::size_t b, SimTime time, EventLog& log, bool observer) {
    bool any = false;
    for (std::size_t ci = 0; ci < state.channels.size(); ++ci) {
        const Channel& c = state.channels[ci];
        if ((c.source == a && c.sink == b) || (c.source == b && c.sink == a)) {
            settle_channel(state, ci, time, log, observer);
            any = true;
        }
    }
    if (!any)
        throw ValidationError("no channel connects '" + state.agents[a].id + "' and '" + state.agents[b].id + "'");
}

void settle(NetworkState& state, const std::string& a, const std::string& b, SimTime time, EventLog& log) {
    settle(state, state.agent_index(a), state.agent_index(b), time, log);
}

AdjustmentSet agent_update(NetworkState& state, std::size_t agent, SimTime time, EventLog& log) {
    Agent& self = state.agents[agent];
    if (self.continuity_exempt) {
        log.push_back(Event{time, state.closed_terms, AgentUpdateEvent{self.id, true, {}, {}, {}, {}}});
        while (state.issuance_cursor < state.issuance.size() && state.issuance[state.issuance_cursor].time <= time) {
            const Money amount = state.issuance[state.issuance_cursor++].amount;
            issue(state, self.id, amount, log);
        }
        return {};
    }

    const BilateralView view = observe(state, agent);
    AdjustmentSet adj = equilibrate(view, self.gain);
    self.windfall = Money(0);
    self.residual = adj.residual;

    AgentUpdateEvent rec{self.id, false, adj.deficit, adj.target, adj.residual, {}};
    for (const auto& d : adj.deltas)
        if (d.delta != Money(0)) rec.deltas.push_back({state.channels[d.channel].id, d.delta});
    log.push_back(Event{time, state.closed_terms, std::move(rec)});

    // Settle at the rates contracted so far; partners learn the new rates only
    // at their next settlement with this agent.
    std::vector<std::size_t> partners;
    for (const auto& d : adj.deltas) {
        if (d.delta == Money(0)) continue;
        const std::size_t p = state.channels[d.channel].sink;
        if (std::find(partners.begin(), partners.end(), p) == partners.end()) partners.push_back(p);
    }
    for (std::size_t p : partners) settle(state, agent, p, time, log);

    for (const auto& d : adj.deltas) {
        if (d.delta == Money(0)) continue;
        Channel& c = state.channels[d.channel];
        detail::accrue(c, time);
        c.rate += d.delta;
        c.last_settled_rate_at_source = c.effective_rate();
    }
    return adj;
}

void inject_shock(NetworkState& state, const std::string& agent, const std::string& counterparty, Money amount,
                  SimTime time, EventLog& log) {
    const std::size_t a = state.agent_index(agent);
    const std::size_t b = state.agent_index(counterparty);
    if (a == b) throw ValidationError("shock agent and counterparty must differ");
    detail::move_money(state, b, a, amount);
    state.agents[a].windfall += amount;
    state.agents[b].windfall -= amount;
    log.push_back(Event{time, state.closed_terms, ShockEvent{agent, counterparty, amount}});
}

SimTime next_occurrence(const NetworkState& state) {
    SimTime t = next_boundary(state);
    if (state.schedule_cursor < state.schedule.size()) t = std::min(t, state.schedule[state.schedule_cursor].time);
    if (!state.agents.empty()) t = std::min(t, next_event(state).time);
    return t;
}

void step(NetworkState& state, EventLog& log) {
    const SimTime boundary = next_boundary(state);
    const bool has_scheduled = state.schedule_cursor < state.schedule.size();
    const SimTime scheduled = has_scheduled ? state.schedule[state.schedule_cursor].time : boundary;
    const NextEvent ev = state.agents.empty() ? NextEvent{0, boundary} : next_event(state);

    if (boundary <= scheduled && boundary <= ev.time) {
        close_term(state, log);
    } else if (has_scheduled && scheduled <= ev.time) {
        fire_scheduled(state, log);
    } else {
        state.now = ev.time;
        agent_update(state, ev.agent, ev.time, log);
        Agent& a = state.agents[ev.agent];
        a.local_time = ev.time;
        ++a.event_index;
        a.next_event = ev.time + detail::waiting_time(state.seed, a.id, a.event_index, a.mean_interval);
    }
}

void run(NetworkState& state, SimTime horizon, EventLog& log) {
    if (horizon.ticks() <= 0) return;
    const SimTime target = state.now + horizon;
    while (next_occurrence(state) <= target) step(state, log);
    state.now = target;
}

EventLog run(NetworkState& state, SimTime horizon) {
    EventLog log;
    run(state, horizon, log);
    return log;
}

}  // namespace mfe
