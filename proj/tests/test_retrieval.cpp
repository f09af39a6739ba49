#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mfe/error.hpp"
#include "mfe/retrieval.hpp"

using namespace mfe;
using namespace mfe::testing;

namespace {

Record plain_record(const ScenarioSpec& spec, std::int64_t terms) {
    NetworkState s = build_network(spec);
    EventLog log;
    run(s, SimTime::terms(terms), log);
    return compile_record(log, s);
}

/// Aggregates-only sheet with every aggregate set to `v`.
Record flat_record(std::int64_t v, std::int64_t terms = 1) {
    Record r;
    for (std::int64_t t = 0; t < terms; ++t) {
        BalanceSheet s;
        s.term_index = t;
        s.aggregates = {Money(v), Money(v), Rational(v), Rational(v)};
        r.sheets.push_back(s);
    }
    return r;
}

/// Cell-by-cell reference for the reproduction error.
double error_oracle(const Record& sim, const Record& target, const FigureWeights& w = {}) {
    const FigureMatrix a = figure_matrix(sim), b = figure_matrix(target);
    double sum = 0;
    for (Eigen::Index f = 0; f < b.values.cols(); ++f) {
        double scale = 1;
        for (Eigen::Index t = 0; t < b.values.rows(); ++t) scale = std::max(scale, std::abs(b.values(t, f)));
        const auto it = w.find(b.names[static_cast<std::size_t>(f)]);
        const double weight = it == w.end() ? 1.0 : it->second;
        for (Eigen::Index t = 0; t < b.values.rows(); ++t) {
            const double d = weight * (a.values(t, f) - b.values(t, f)) / scale;
            sum += d * d;
        }
    }
    return std::sqrt(sum / static_cast<double>(b.values.size()));
}

ScenarioSpec three_agent() { return load_scenario(source_path("scenarios/three-agent.json")); }

}  // namespace

TEST_CASE("the empty assignment reproduces the plain run") {
    const ScenarioSpec spec = three_agent();
    CHECK(retrace({}, spec, 6) == plain_record(spec, 6));
    CHECK(retrace({}, spec, 6) == retrace({}, spec, 6));
    CHECK(reproduction_error(retrace({}, spec, 6), plain_record(spec, 6)) == 0.0);
}

TEST_CASE("an offset raises the agent's adjustable outflow from time 0") {
    InconsistencyAssignment x;
    x.offsets["a"] = Money(10);
    x.gains = {{"a", Rational(0)}, {"b", Rational(0)}};
    const Record r = retrace(x, kernel_spec(), 2);
    CHECK(r.sheets[0].figures.at(0).value == Rational(20));
    CHECK(r.sheets[0].figures.at(1).value == Rational(8));
    CHECK(r.sheets[1].figures.at(0).value == Rational(20));
}

TEST_CASE("offsets spread over several adjustable channels by largest remainder") {
    ScenarioSpec spec = kernel_spec(Rational(0));
    spec.agents.push_back(agent("c", Role::Custom, 100));
    spec.channels.push_back(channel("ac", "a", "c", 30, true));
    NetworkState s = build_network(spec);
    apply_assignment(s, {{{"a", Money(5)}}, {}});
    CHECK(s.channels[s.channel_index("ab")].rate == Money(11));  // 10/40 of 5 = 1.25
    CHECK(s.channels[s.channel_index("ac")].rate == Money(34));  // 30/40 of 5 = 3.75
    // b's snapshot of ab stays stale.
    CHECK(s.channels[s.channel_index("ab")].last_settled_rate_at_sink == Rational(10));
}

TEST_CASE("invalid assignments") {
    const ScenarioSpec spec = kernel_spec();
    CHECK(assignment_agents(spec) == std::vector<std::string>{"a", "b"});
    CHECK(minimum_offset(spec, "a") == Money(-10));
    NetworkState s = build_network(spec);
    CHECK_NOTHROW(apply_assignment(s, {{{"a", Money(-10)}}, {}}));
    s = build_network(spec);
    CHECK_THROWS_AS(apply_assignment(s, {{{"a", Money(-11)}}, {}}), ValidationError);
    CHECK_THROWS_AS(apply_assignment(s, {{{"cb", Money(1)}}, {}}), ValidationError);
    CHECK_THROWS(apply_assignment(s, {{{"zz", Money(1)}}, {}}));
    CHECK_THROWS_AS(apply_assignment(s, {{}, {{"a", Rational(-1)}}}), ValidationError);
}

TEST_CASE("reproduction error: hand values and the cell oracle") {
    CHECK(reproduction_error(flat_record(110), flat_record(100)) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(reproduction_error(flat_record(0), flat_record(0)) == 0.0);
    CHECK_THROWS_AS(reproduction_error(flat_record(1, 2), flat_record(1, 3)), ValidationError);

    const ScenarioSpec spec = three_agent();
    const Record target = plain_record(spec, 5);
    for (std::int64_t off : {-40, -7, 3, 25}) {
        const Record sim = retrace({{{"alpha", Money(off)}}, {}}, spec, 5);
        CHECK(reproduction_error(sim, target) == doctest::Approx(error_oracle(sim, target)).epsilon(1e-12));
        const FigureWeights w{{"alpha.closing_stock", 3.0}, {"figure:flow_beta_alpha", 0.5}};
        CHECK(reproduction_error(sim, target, w) == doctest::Approx(error_oracle(sim, target, w)).epsilon(1e-12));

        FigureWeights doubled;
        for (const auto& n : figure_matrix(target).names) doubled[n] = 2.0;
        CHECK(reproduction_error(sim, target, doubled) == doctest::Approx(2 * reproduction_error(sim, target)));
    }
}

TEST_CASE("prefix: later terms neither change nor count") {
    const ScenarioSpec spec = three_agent();
    const InconsistencyAssignment x{{{"beta", Money(12)}}, {}};
    const Record long_run = retrace(x, spec, 8), short_run = retrace(x, spec, 3);
    for (std::size_t t = 0; t < 3; ++t) CHECK(long_run.sheets[t] == short_run.sheets[t]);

    Record target = plain_record(spec, 8);
    const double before = reproduction_error(long_run, target, {}, 3);
    target.sheets[6].agents[1].closing_stock += Money(1000);
    CHECK(reproduction_error(long_run, target, {}, 3) == before);
    CHECK(reproduction_error(long_run, target) != reproduction_error(long_run, plain_record(spec, 8)));
}

TEST_CASE("fit: the truth is found at the first evaluation when it is the zero start") {
    const ScenarioSpec spec = three_agent();
    const FitResult r = fit(plain_record(spec, 6), spec, FitConfig{});
    CHECK(r.error == 0.0);
    CHECK(r.converged);
    CHECK(r.evaluations == 1);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0] == std::pair<std::int64_t, double>{1, 0.0});
}

TEST_CASE("fit: budget, trace shape and recovery of a planted offset") {
    const ScenarioSpec spec = three_agent();
    const InconsistencyAssignment hidden{{{"alpha", Money(17)}, {"beta", Money(-9)}}, {}};
    const Record target = retrace(hidden, spec, 6);

    FitConfig one;
    one.budget = 1;
    const FitResult tiny = fit(target, spec, one);
    CHECK(tiny.evaluations == 1);
    CHECK_FALSE(tiny.converged);

    FitConfig cfg;
    cfg.seed = 5;
    const FitResult r = fit(target, spec, cfg);
    CHECK(r.converged);
    CHECK(r.error <= cfg.tolerance);
    CHECK(r.evaluations <= cfg.budget);
    CHECK(reproduction_error(retrace(r.best, spec, 6), target) == r.error);
    REQUIRE(!r.trace.empty());
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        CHECK(r.trace[i].first > r.trace[i - 1].first);
        CHECK(r.trace[i].second < r.trace[i - 1].second);
    }
    CHECK(r.trace.back().second == r.error);
}

TEST_CASE("fit: results do not depend on the number of jobs") {
    const ScenarioSpec spec = three_agent();
    const Record target = retrace({{{"alpha", Money(-31)}, {"beta", Money(44)}}, {}}, spec, 5);
    FitConfig cfg;
    cfg.seed = 11;
    cfg.budget = 1500;
    cfg.starts = 12;
    const FitResult serial = fit(target, spec, cfg);
    cfg.jobs = 4;
    const FitResult parallel = fit(target, spec, cfg);
    CHECK(parallel.best == serial.best);
    CHECK(parallel.error == serial.error);
    CHECK(parallel.evaluations == serial.evaluations);
    CHECK(parallel.trace == serial.trace);
}
