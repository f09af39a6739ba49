#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mfe/engine.hpp"
#include "mfe/error.hpp"
#include "mfe/record.hpp"

using namespace mfe;
using namespace mfe::testing;

namespace {

struct Run {
    NetworkState state;
    EventLog log;
    Record record;
};

Run run_terms(const ScenarioSpec& spec, std::int64_t terms) {
    Run r{build_network(spec), {}, {}};
    run(r.state, SimTime::terms(terms), r.log);
    r.record = compile_record(r.log, r.state);
    return r;
}

const AgentLine& line(const BalanceSheet& s, const std::string& id) {
    for (const auto& a : s.agents)
        if (a.id == id) return a;
    FAIL("no agent line " << id);
    return s.agents.front();
}

Record golden_record() {
    Record r;
    r.fingerprint = "0123456789abcdef";
    BalanceSheet s;
    s.agents = {{"central_bank", Money(0), Money(500), Money(500), Money(0)},
                {"a", Money(100), Money(70), Money(0), Money(30)},
                {"b", Money(50), Money(80), Money(30), Money(0)}};
    s.aggregates = {Money(500), Money(0), Rational(1, 20), Rational(3, 40)};
    s.base_money = Money(150);
    s.figures = {{"flow_ab", Rational(30)}, {"share", Rational(1, 3)}};
    r.sheets.push_back(s);
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

long parse_error_line(const std::string& text) {
    try {
        parse_record(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST_CASE("a term without agent events carries stocks forward") {
    ScenarioSpec spec = pair_spec();
    spec.channels.clear();
    const Run r = run_terms(spec, 2);
    REQUIRE(r.record.terms() == 2);
    for (const auto& s : r.record.sheets)
        for (const auto& a : s.agents) {
            CHECK(a.opening_stock == a.closing_stock);
            CHECK(a.inflow_total == Money(0));
            CHECK(a.outflow_total == Money(0));
        }
    CHECK(r.record.sheets[1].term_index == 1);
}

TEST_CASE("one settled channel, hand-computed sheet") {
    const Run r = run_terms(pair_spec(), 1);
    REQUIRE(r.record.terms() == 1);
    const auto& s = r.record.sheets[0];
    CHECK(line(s, "a").opening_stock == Money(100));
    CHECK(line(s, "a").outflow_total == Money(10));
    CHECK(line(s, "a").closing_stock == Money(90));
    CHECK(line(s, "b").inflow_total == Money(10));
    CHECK(line(s, "b").closing_stock == Money(60));
    CHECK(s.base_money == Money(150));
    CHECK(s.aggregates.notes_outstanding == Money(0));
    CHECK(verify_identities(s).all_passed());
}

TEST_CASE("three kinds of movement in one term sum by hand") {
    ScenarioSpec spec = kernel_spec(Rational(0));
    spec.shocks = {{SimTime::from_terms(0.3), "a", "b", Money(5)}};
    const Run r = run_terms(spec, 1);
    const auto& s = r.record.sheets[0];
    // a: +5 shock, -10 on ab, +8 on ba.
    CHECK(line(s, "a").inflow_total == Money(13));
    CHECK(line(s, "a").outflow_total == Money(10));
    CHECK(line(s, "a").closing_stock == Money(103));
    CHECK(line(s, "b").inflow_total == Money(10));
    CHECK(line(s, "b").outflow_total == Money(13));
    CHECK(line(s, "b").closing_stock == Money(97));
    CHECK(s.figures.at(0).value == Rational(10));
    CHECK(s.figures.at(1).value == Rational(8));
}

TEST_CASE("issuance shows as central bank inflow and as notes outstanding") {
    ScenarioSpec spec = pair_spec();
    spec.policy.issuance = {{SimTime{}, Money(400)}};
    const Run r = run_terms(spec, 3);
    const auto& s0 = r.record.sheets[0];
    CHECK(line(s0, "cb").inflow_total == Money(400));
    CHECK(s0.aggregates.notes_outstanding == Money(400));
    for (const auto& rep : verify_identities(r.record)) CHECK(rep.all_passed());
}

TEST_CASE("identity checker catches a single unit") {
    const Run r = run_terms(pair_spec(), 1);
    BalanceSheet s = r.record.sheets[0];
    s.agents[1].closing_stock += Money(1);
    const auto rep = verify_identities(s);
    CHECK_FALSE(rep.all_passed());
    CHECK(rep.failures() == 2);  // the agent's own line and the total
    bool saw_one = false;
    for (const auto& c : rep.checks)
        if (!c.passed) saw_one = saw_one || c.discrepancy == Money(1) || c.discrepancy == Money(-1);
    CHECK(saw_one);

    BalanceSheet empty;
    CHECK(verify_identities(empty).all_passed());
}

TEST_CASE("property: identities hold on every term across seeds") {
    const ScenarioSpec base = load_scenario(source_path("scenarios/national-5.json"));
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        ScenarioSpec spec = base;
        spec.seed = seed;
        const Run r = run_terms(spec, 30);
        REQUIRE(r.record.terms() == 30);
        for (const auto& rep : verify_identities(r.record)) REQUIRE(rep.all_passed());
        for (std::size_t t = 1; t < r.record.terms(); ++t)
            for (std::size_t i = 0; i < r.record.sheets[t].agents.size(); ++i)
                REQUIRE(r.record.sheets[t].agents[i].opening_stock == r.record.sheets[t - 1].agents[i].closing_stock);
    }
}

TEST_CASE("round trips in both formats") {
    const Run r = run_terms(load_scenario(source_path("scenarios/national-5.json")), 12);
    for (auto fmt : {RecordFormat::Csv, RecordFormat::Json}) {
        const std::string text = record_to_string(r.record, fmt);
        CHECK(parse_record(text) == r.record);
        CHECK(record_to_string(parse_record(text), fmt) == text);
    }
    CHECK(parse_record(record_to_string(golden_record(), RecordFormat::Json)) == golden_record());
}

TEST_CASE("empty record is the header only") {
    Record r;
    r.fingerprint = "0000000000000000";
    const std::string csv = record_to_string(r, RecordFormat::Csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(parse_record(csv).terms() == 0);
    CHECK(parse_record(record_to_string(r, RecordFormat::Json)).terms() == 0);
}

TEST_CASE("CSV writer matches the golden file byte for byte") {
    const std::string golden = slurp(source_path("tests/golden/one_term.csv"));
    CHECK(record_to_string(golden_record(), RecordFormat::Csv) == golden);
    CHECK(parse_record(golden) == golden_record());
}

TEST_CASE("reader tolerance and errors") {
    const std::string golden = slurp(source_path("tests/golden/one_term.csv"));

    std::string crlf;
    for (char c : golden) {
        if (c == '\n') crlf += '\r';
        crlf += c;
    }
    CHECK(parse_record(crlf) == golden_record());
    CHECK(parse_record(golden + "\n\n") == golden_record());

    // Renumber the only term to 1.
    std::string gap = golden;
    for (std::size_t p = 0; (p = gap.find("\n0,", p)) != std::string::npos;) gap.replace(p, 3, "\n1,");
    CHECK(parse_error_line(gap) == 5);

    std::string bad_cell = golden;
    bad_cell.replace(bad_cell.find(",100,"), 5, ",1x0,");
    CHECK(parse_error_line(bad_cell) == 6);

    std::string no_agg = golden.substr(0, golden.rfind("0,aggregates"));
    CHECK_THROWS_AS(parse_record(no_agg), ParseError);

    CHECK_THROWS_AS(parse_record("{\"format\": \"nope\"}"), ParseError);
    CHECK_THROWS_AS(parse_record("{ not json"), ParseError);
}

TEST_CASE("identity failures: reject or warn") {
    std::string golden = slurp(source_path("tests/golden/one_term.csv"));
    golden.replace(golden.find("0,agent,a,100,70"), 16, "0,agent,a,100,71");
    CHECK_THROWS_AS(parse_record(golden), ValidationError);
    std::vector<std::string> warnings;
    const Record r = parse_record(golden, IdentityPolicy::Warn, &warnings);
    CHECK(r.terms() == 1);
    CHECK(!warnings.empty());
}

TEST_CASE("compiling a term the log has not closed is an error") {
    Run r = run_terms(pair_spec(), 2);
    CHECK_THROWS_AS(compile_balance_sheet(r.log, r.state, 2, r.state.term_length), ValidationError);
    CHECK(compile_balance_sheet(r.log, r.state, 1, r.state.term_length) == r.record.sheets[1]);
}
