#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "mfe/engine.hpp"
#include "mfe/error.hpp"
#include "mfe/philox.hpp"

using namespace mfe;
using namespace mfe::testing;

namespace {

BilateralView::Entry out_entry(std::size_t ch, std::int64_t rate, bool adjustable = true) {
    return {ch, 1, true, adjustable, Rational(rate), Money(rate), SimTime{}};
}

BilateralView::Entry in_entry(std::size_t ch, Rational rate) { return {ch, 1, false, false, rate, Money(0), SimTime{}}; }

Rational correction_total(const AdjustmentSet& a) { return Rational(a.total()) + a.residual; }

}  // namespace

TEST_CASE("equilibrate one-step oracles") {
    SUBCASE("balanced view does nothing") {
        BilateralView v;
        v.entries = {out_entry(0, 10), in_entry(1, Rational(10))};
        const auto a = equilibrate(v, Rational(1));
        CHECK(a.deficit == Rational(0));
        CHECK(a.total() == Money(0));
        CHECK(a.residual == Rational(0));
    }
    SUBCASE("gain 1 closes the deficit") {
        BilateralView v;
        v.entries = {out_entry(0, 10), in_entry(1, Rational(8))};
        const auto a = equilibrate(v, Rational(1));
        REQUIRE(a.deltas.size() == 1);
        CHECK(a.deltas[0].delta == Money(-2));
        CHECK(a.residual == Rational(0));
    }
    SUBCASE("gain 1/2 closes half") {
        BilateralView v;
        v.entries = {out_entry(0, 10), in_entry(1, Rational(8))};
        const auto a = equilibrate(v, Rational(1, 2));
        CHECK(a.deltas[0].delta == Money(-1));
        CHECK(a.residual == Rational(0));
    }
    SUBCASE("clamp at zero sends the rest to the residual") {
        BilateralView v;
        v.entries = {out_entry(0, 1)};
        const auto a = equilibrate(v, Rational(5));
        CHECK(a.deltas[0].delta == Money(-1));
        CHECK(a.residual == Rational(-4));
    }
    SUBCASE("largest remainder over equal rates favours the lower index") {
        BilateralView v;
        v.entries = {out_entry(0, 4), out_entry(1, 4), out_entry(2, 4), in_entry(3, Rational(10))};
        const auto a = equilibrate(v, Rational(1));  // d = 2
        CHECK(a.deltas[0].delta == Money(-1));
        CHECK(a.deltas[1].delta == Money(-1));
        CHECK(a.deltas[2].delta == Money(0));
    }
    SUBCASE("all-zero outgoing rates split equally") {
        BilateralView v;
        v.entries = {out_entry(0, 0), out_entry(1, 0), in_entry(2, Rational(4))};
        const auto a = equilibrate(v, Rational(1));  // surplus 4
        CHECK(a.deltas[0].delta == Money(2));
        CHECK(a.deltas[1].delta == Money(2));
    }
    SUBCASE("fractional target keeps the fraction as residual") {
        BilateralView v;
        v.entries = {out_entry(0, 10), in_entry(1, Rational(15, 2))};
        const auto a = equilibrate(v, Rational(1));  // d = 5/2
        CHECK(a.deltas[0].delta == Money(-2));
        CHECK(a.residual == Rational(-1, 2));
    }
    SUBCASE("non-adjustable outgoing channels are left alone") {
        BilateralView v;
        v.entries = {out_entry(0, 10, false), out_entry(1, 5), in_entry(2, Rational(12))};
        const auto a = equilibrate(v, Rational(1));  // d = 3
        REQUIRE(a.deltas.size() == 1);
        CHECK(a.deltas[0].channel == 1);
        CHECK(a.deltas[0].delta == Money(-3));
    }
    CHECK_THROWS_AS(equilibrate(BilateralView{}, Rational(-1)), ValidationError);
}

TEST_CASE("property: corrections are exact and never drive a rate negative") {
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
        CounterRng rng(seed, "equilibrate");
        BilateralView v;
        const int n_out = static_cast<int>(rng.uniform_int(0, 4));
        const int n_in = static_cast<int>(rng.uniform_int(0, 4));
        std::size_t ch = 0;
        for (int i = 0; i < n_out; ++i) v.entries.push_back(out_entry(ch++, rng.uniform_int(0, 60), rng.uniform_int(0, 3) != 0));
        for (int i = 0; i < n_in; ++i) v.entries.push_back(in_entry(ch++, Rational(rng.uniform_int(0, 400), rng.uniform_int(1, 8))));
        v.windfall = Money(rng.uniform_int(-20, 20));
        const Rational gain(rng.uniform_int(0, 12), rng.uniform_int(1, 4));
        const auto a = equilibrate(v, gain);
        CHECK(correction_total(a) == -(gain * v.deficit()));
        for (const auto& d : a.deltas) {
            const auto it = std::find_if(v.entries.begin(), v.entries.end(), [&](const auto& e) { return e.channel == d.channel; });
            CHECK(it->base_rate + d.delta >= Money(0));
        }
    }
}

TEST_CASE("next_event tie-break and determinism") {
    NetworkState s = build_network(kernel_spec());
    const NextEvent first = next_event(s);
    CHECK(next_event(s).agent == first.agent);
    CHECK(next_event(s).time == first.time);

    for (auto& a : s.agents) a.next_event = SimTime::terms(3);
    CHECK(s.agents[next_event(s).agent].id == "a");  // "a" < "b" < "cb"

    ScenarioSpec solo;
    solo.agents = {agent("cb", Role::CentralBank)};
    NetworkState one = build_network(solo);
    EventLog log;
    for (int i = 0; i < 5; ++i) {
        CHECK(next_event(one).agent == 0);
        step(one, log);
    }
}

TEST_CASE("waiting times are keyed by seed, agent and event index") {
    const auto w = detail::waiting_time(9, "a", 3, 0.25);
    CHECK(w == detail::waiting_time(9, "a", 3, 0.25));
    CHECK(w != detail::waiting_time(9, "a", 4, 0.25));
    CHECK(w != detail::waiting_time(9, "b", 3, 0.25));
    CHECK(w != detail::waiting_time(10, "a", 3, 0.25));
    CHECK(w.ticks() >= 1);
}

TEST_CASE("observe: stale for partners, current for self") {
    NetworkState s = build_network(kernel_spec());
    EventLog log;
    const std::size_t a = s.agent_index("a"), b = s.agent_index("b");
    auto inflow_seen_by_a = [&] { return observe(s, a).inflow(); };

    CHECK(inflow_seen_by_a() == Rational(8));

    // b raises its outgoing rate without settling: a still sees 8, b sees its own 12.
    s.channels[s.channel_index("ba")].rate = Money(12);
    CHECK(inflow_seen_by_a() == Rational(8));
    CHECK(observe(s, b).outflow() == Rational(12));

    settle(s, a, b, SimTime::from_terms(0.5), log);
    CHECK(inflow_seen_by_a() == Rational(12));
    CHECK_THROWS_AS(observe(s, "nobody"), UnknownIdError);
}

TEST_CASE("settle accrues with carry and transfers whole units") {
    NetworkState s = build_network(pair_spec());
    EventLog log;
    const auto a = s.agent_index("a"), b = s.agent_index("b");
    auto last_amount = [&] { return std::get<SettlementEvent>(log.back().payload).amount; };

    settle(s, a, b, SimTime{}, log);
    CHECK(last_amount() == Money(0));

    settle(s, a, b, SimTime::from_terms(0.25), log);
    const Money first = last_amount();
    settle(s, a, b, SimTime::from_terms(0.5), log);
    CHECK(first == Money(2));
    CHECK(first + last_amount() == Money(5));

    settle(s, a, b, SimTime::from_terms(1.5), log);
    CHECK(last_amount() == Money(10));
    CHECK(s.agents[a].stock == Money(85));

    ScenarioSpec spec = pair_spec();
    spec.agents.push_back(agent("c", Role::Custom));
    NetworkState t = build_network(spec);
    CHECK_THROWS_AS(settle(t, "a", "c", SimTime::terms(1), log), ValidationError);
}

TEST_CASE("two-agent kernel: a perfect correction on stale data unbalances the partner") {
    NetworkState s = build_network(kernel_spec());
    EventLog log;
    const std::size_t a = s.agent_index("a"), b = s.agent_index("b");
    const SimTime t1 = SimTime::from_terms(0.1), t2 = SimTime::from_terms(0.2);

    // b is in surplus (in 10, out 8) and raises b->a to 10; a does not see it yet.
    const auto adj_b = agent_update(s, b, t1, log);
    CHECK(adj_b.deficit == Rational(-2));
    CHECK(s.channels[s.channel_index("ba")].rate == Money(10));
    CHECK(observe(s, a).inflow() == Rational(8));

    // a sees out 10 against in 8 and cuts a->b to 8.
    const BilateralView seen = observe(s, a);
    const auto adj_a = agent_update(s, a, t2, log);
    CHECK(adj_a.deficit == Rational(2));
    CHECK(adj_a.total() == Money(-2));
    CHECK(seen.deficit() + Rational(adj_a.total()) == Rational(0));  // balanced in its own view
    CHECK(true_imbalance(s, b) == Rational(-2));                     // but b now pays 10 and receives 8
    CHECK(closed_flow_sum(s) == Rational(0));
}

TEST_CASE("gain zero freezes every rate") {
    const ScenarioSpec spec = kernel_spec(Rational(0));
    NetworkState s = build_network(spec);
    EventLog log;
    for (int i = 0; i < 500; ++i) step(s, log);
    CHECK(s.channels[0].rate == Money(10));
    CHECK(s.channels[1].rate == Money(8));
}

TEST_CASE("gain zero: stocks follow the closed-form accrual") {
    ScenarioSpec spec = pair_spec();
    spec.channels[0].multiplier = Rational(3, 4);  // 7.5 per term
    for (std::int64_t n : {1, 2, 3, 7, 20}) {
        NetworkState s = build_network(spec);
        run(s, SimTime::terms(n));
        const std::int64_t moved = (15 * n) / 2;  // floor(7.5 n)
        CHECK(s.agents[s.agent_index("a")].stock == Money(100 - moved));
        CHECK(s.agents[s.agent_index("b")].stock == Money(50 + moved));
    }
}

TEST_CASE("run: empty horizon, determinism and composability") {
    const ScenarioSpec spec = load_scenario(source_path("scenarios/national-5.json"));
    {
        NetworkState s = build_network(spec);
        CHECK(run(s, SimTime{}).empty());
        CHECK(s.now == SimTime{});
    }
    NetworkState x = build_network(spec), y = build_network(spec), z = build_network(spec);
    const EventLog lx = run(x, SimTime::from_terms(7.3));
    const EventLog ly = run(y, SimTime::from_terms(7.3));
    CHECK(to_jsonl(lx) == to_jsonl(ly));

    EventLog lz = run(z, SimTime::from_terms(2.6));
    run(z, SimTime::from_terms(4.7), lz);
    CHECK(z.now == x.now);
    CHECK(to_jsonl(lz) == to_jsonl(lx));
    for (std::size_t i = 0; i < x.agents.size(); ++i) CHECK(z.agents[i].stock == x.agents[i].stock);
    for (std::size_t i = 0; i < x.channels.size(); ++i) {
        CHECK(z.channels[i].rate == x.channels[i].rate);
        CHECK(z.channels[i].accrued == x.channels[i].accrued);
    }
    for (std::size_t i = 1; i < lx.size(); ++i) CHECK(lx[i - 1].time <= lx[i].time);
}

TEST_CASE("shocks redistribute and never create money") {
    NetworkState s = build_network(kernel_spec());
    EventLog log;
    const auto a = s.agent_index("a"), b = s.agent_index("b");

    inject_shock(s, "a", "b", Money(0), SimTime{}, log);
    CHECK(s.agents[a].stock == Money(100));
    CHECK(log.back().kind() == EventKind::Shock);

    inject_shock(s, "a", "b", Money(50), SimTime{}, log);
    CHECK(s.agents[a].stock == Money(150));
    CHECK(s.agents[b].stock == Money(50));
    CHECK(s.agents[a].windfall == Money(50));

    inject_shock(s, "a", "b", Money(-50), SimTime{}, log);
    CHECK(s.agents[a].stock == Money(100));
    CHECK(s.agents[b].stock == Money(100));
    CHECK_THROWS_AS(inject_shock(s, "zz", "b", Money(1), SimTime{}, log), UnknownIdError);
}

TEST_CASE("property: conservation after every step with shocks and issuance") {
    const ScenarioSpec base = load_scenario(source_path("scenarios/national-5.json"));
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        ScenarioSpec spec = base;
        spec.seed = seed;
        CounterRng rng(seed, "shock-schedule");
        const char* ids[] = {"government", "banks", "households", "corporations"};
        for (int k = 0; k < 6; ++k) {
            const auto i = rng.uniform_int(0, 3), j = (i + rng.uniform_int(1, 3)) % 4;
            spec.shocks.push_back({SimTime::from_ticks(rng.uniform_int(0, 30 * SimTime::kTicksPerTerm)), ids[i], ids[j],
                                   Money(rng.uniform_int(-300, 300))});
        }
        NetworkState s = build_network(spec);
        EventLog log;
        for (int k = 0; k < 2000; ++k) {
            step(s, log);
            REQUIRE(s.total_stock() - s.cumulative_issuance == s.initial_total_stock);
            REQUIRE(closed_flow_sum(s) == Rational(0));
        }
    }
}

TEST_CASE("equal times: boundary first, then schedule, then agents") {
    ScenarioSpec spec = load_scenario(source_path("scenarios/national-5.json"));
    spec.policy.multipliers.push_back({SimTime::terms(1), "discount", Rational(1, 10)});
    NetworkState s = build_network(spec);
    EventLog log;
    run(s, SimTime::terms(2), log);
    std::vector<const Event*> at_one;
    for (const auto& e : log)
        if (e.time == SimTime::terms(1)) at_one.push_back(&e);
    REQUIRE(!at_one.empty());
    // Observer settlements and the cut come before the policy change.
    const auto boundary = std::find_if(at_one.begin(), at_one.end(), [](auto* e) { return e->kind() == EventKind::Boundary; });
    const auto policy = std::find_if(at_one.begin(), at_one.end(), [](auto* e) { return e->kind() == EventKind::Policy; });
    REQUIRE(boundary != at_one.end());
    REQUIRE(policy != at_one.end());
    CHECK(boundary < policy);
    CHECK(std::get<BoundaryEvent>((*boundary)->payload).aggregates.discount_rate == Rational(1, 20));
}
