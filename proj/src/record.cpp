#include "mfe/record.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mfe {

namespace {

constexpr const char* kFixedColumns[] = {"term",
                                         "kind",
                                         "id",
                                         "opening_stock",
                                         "closing_stock",
                                         "inflow_total",
                                         "outflow_total",
                                         "base_money",
                                         "notes_outstanding",
                                         "government_securities_outstanding",
                                         "discount_rate",
                                         "securities_interest_rate"};
constexpr std::size_t kNumFixed = std::size(kFixedColumns);
constexpr const char* kFigurePrefix = "figure:";

struct SheetBuilder {
    BalanceSheet sheet;
    std::vector<Money> inflow;
    std::vector<Money> outflow;
    bool closed = false;
};

}  // namespace

Record compile_record(const EventLog& log, const NetworkState& state) {
    const std::size_t n_agents = state.agents.size();
    std::vector<SheetBuilder> builders;
    auto builder = [&](std::int64_t term) -> SheetBuilder& {
        if (term < 0) throw ValidationError("event booked to negative term");
        while (builders.size() <= static_cast<std::size_t>(term)) {
            SheetBuilder b;
            b.sheet.term_index = static_cast<std::int64_t>(builders.size());
            b.inflow.assign(n_agents, Money(0));
            b.outflow.assign(n_agents, Money(0));
            builders.push_back(std::move(b));
        }
        return builders[static_cast<std::size_t>(term)];
    };
    auto flow = [&](SheetBuilder& b, std::size_t from, std::size_t to, Money amount) {
        if (amount < Money(0)) {
            std::swap(from, to);
            amount = -amount;
        }
        b.outflow[from] += amount;
        b.inflow[to] += amount;
    };

    std::vector<BoundaryEvent const*> boundaries;
    for (const Event& e : log) {
        SheetBuilder& b = builder(e.term);
        if (b.closed && e.kind() != EventKind::Boundary)
            throw ValidationError("event booked to term " + std::to_string(e.term) + " after its boundary");
        switch (e.kind()) {
            case EventKind::Transfer: {
                const auto& t = std::get<TransferEvent>(e.payload);
                const Channel& c = state.channels[state.channel_index(t.channel)];
                flow(b, c.source, c.sink, t.amount);
                break;
            }
            case EventKind::Settlement: {
                const auto& t = std::get<SettlementEvent>(e.payload);
                const Channel& c = state.channels[state.channel_index(t.channel)];
                flow(b, c.source, c.sink, t.amount);
                break;
            }
            case EventKind::Shock: {
                const auto& s = std::get<ShockEvent>(e.payload);
                flow(b, state.agent_index(s.counterparty), state.agent_index(s.agent), s.amount);
                break;
            }
            case EventKind::Issue: {
                const auto& s = std::get<IssueEvent>(e.payload);
                const std::size_t cb = state.agent_index(s.agent);
                if (s.amount >= Money(0))
                    b.inflow[cb] += s.amount;
                else
                    b.outflow[cb] -= s.amount;
                break;
            }
            case EventKind::Boundary: {
                if (b.closed) throw ValidationError("duplicate boundary for term " + std::to_string(e.term));
                const SimTime expected = SimTime::from_ticks((e.term + 1) * state.term_length.ticks());
                if (e.time != expected)
                    throw ValidationError("boundary for term " + std::to_string(e.term) + " at unexpected time");
                const auto& bd = std::get<BoundaryEvent>(e.payload);
                if (bd.stocks.size() != n_agents) throw ValidationError("boundary stock vector has wrong size");
                b.closed = true;
                b.sheet.aggregates = bd.aggregates;
                b.sheet.agents.resize(n_agents);
                for (std::size_t i = 0; i < n_agents; ++i) b.sheet.agents[i].closing_stock = bd.stocks[i];
                b.sheet.figures.clear();
                for (std::size_t f = 0; f < state.figures.size() && f < bd.figures.size(); ++f)
                    b.sheet.figures.push_back({state.figures[f].name, bd.figures[f]});
                break;
            }
            case EventKind::AgentUpdate:
            case EventKind::Policy: break;
        }
    }

    Record rec;
    rec.fingerprint = state.fingerprint;
    rec.term_length = state.term_length;
    std::vector<Money> opening = state.initial_stocks;
    for (auto& b : builders) {
        if (!b.closed) break;
        b.sheet.base_money = state.initial_total_stock;
        for (std::size_t i = 0; i < n_agents; ++i) {
            AgentLine& line = b.sheet.agents[i];
            line.id = state.agents[i].id;
            line.opening_stock = opening[i];
            line.inflow_total = b.inflow[i];
            line.outflow_total = b.outflow[i];
            opening[i] = line.closing_stock;
        }
        rec.sheets.push_back(std::move(b.sheet));
    }
    return rec;
}

BalanceSheet compile_balance_sheet(const EventLog& log, const NetworkState& state, std::int64_t term_index,
                                   SimTime term_length) {
    if (term_length != state.term_length) throw ValidationError("term length does not match the simulated network");
    if (term_index < 0) throw ValidationError("negative term index");
    Record rec = compile_record(log, state);
    if (static_cast<std::size_t>(term_index) >= rec.sheets.size())
        throw ValidationError("incomplete log coverage: term " + std::to_string(term_index) + " has not been closed");
    return rec.sheets[static_cast<std::size_t>(term_index)];
}

bool IdentityReport::all_passed() const { return failures() == 0; }

std::size_t IdentityReport::failures() const {
    std::size_t n = 0;
    for (const auto& c : checks)
        if (!c.passed) ++n;
    return n;
}

IdentityReport verify_identities(const BalanceSheet& sheet) {
    IdentityReport r;
    r.term_index = sheet.term_index;
    if (sheet.agents.empty()) return r;
    Money total_closing{0};
    for (const auto& a : sheet.agents) {
        const Money rhs = a.opening_stock + a.inflow_total - a.outflow_total;
        const Money diff = a.closing_stock - rhs;
        r.checks.push_back({"continuity[" + a.id + "]", diff == Money(0), diff});
        total_closing += a.closing_stock;
    }
    const Money diff = total_closing - (sheet.aggregates.notes_outstanding + sheet.base_money);
    r.checks.push_back({"money_stock", diff == Money(0), diff});
    return r;
}

std::vector<IdentityReport> verify_identities(const Record& record) {
    std::vector<IdentityReport> out;
    out.reserve(record.sheets.size());
    for (const auto& s : record.sheets) out.push_back(verify_identities(s));
    return out;
}

// ---------------------------------------------------------------- writing

namespace {

void check_csv_token(const std::string& s, const char* what) {
    if (s.find_first_of(",\"\n\r") != std::string::npos)
        throw ValidationError(std::string(what) + " '" + s + "' cannot be written to CSV");
}

void write_csv(const Record& rec, std::ostream& out) {
    out << "# mfe-record v1\n";
    out << "# fingerprint: " << rec.fingerprint << "\n";
    out << "# term_length: " << rec.term_length.as_terms().to_string() << "\n";
    for (std::size_t i = 0; i < kNumFixed; ++i) out << (i ? "," : "") << kFixedColumns[i];
    std::vector<std::string> figure_names;
    if (!rec.sheets.empty())
        for (const auto& f : rec.sheets.front().figures) {
            check_csv_token(f.name, "figure name");
            figure_names.push_back(f.name);
            out << "," << kFigurePrefix << f.name;
        }
    out << "\n";
    const std::string agent_tail(kNumFixed - 7 + figure_names.size(), ',');
    for (const auto& s : rec.sheets) {
        for (const auto& a : s.agents) {
            check_csv_token(a.id, "agent id");
            out << s.term_index << ",agent," << a.id << "," << a.opening_stock << "," << a.closing_stock << ","
                << a.inflow_total << "," << a.outflow_total << agent_tail << "\n";
        }
        out << s.term_index << ",aggregates,,,,,," << s.base_money << "," << s.aggregates.notes_outstanding << ","
            << s.aggregates.government_securities_outstanding << "," << s.aggregates.discount_rate << ","
            << s.aggregates.securities_interest_rate;
        if (s.figures.size() != figure_names.size()) throw ValidationError("figure set differs between terms");
        for (std::size_t f = 0; f < s.figures.size(); ++f) {
            if (s.figures[f].name != figure_names[f]) throw ValidationError("figure set differs between terms");
            out << "," << s.figures[f].value;
        }
        out << "\n";
    }
}

void write_json(const Record& rec, std::ostream& out) {
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["format"] = "mfe-record";
    j["version"] = 1;
    j["fingerprint"] = rec.fingerprint;
    j["term_length"] = rec.term_length.as_terms().to_string();
    j["sheets"] = ojson::array();
    for (const auto& s : rec.sheets) {
        ojson js;
        js["term"] = s.term_index;
        js["base_money"] = s.base_money.units();
        js["agents"] = ojson::array();
        for (const auto& a : s.agents)
            js["agents"].push_back(ojson{{"id", a.id},
                                         {"opening_stock", a.opening_stock.units()},
                                         {"closing_stock", a.closing_stock.units()},
                                         {"inflow_total", a.inflow_total.units()},
                                         {"outflow_total", a.outflow_total.units()}});
        js["aggregates"] = ojson{
            {"notes_outstanding", s.aggregates.notes_outstanding.units()},
            {"government_securities_outstanding", s.aggregates.government_securities_outstanding.units()},
            {"discount_rate", s.aggregates.discount_rate.to_string()},
            {"securities_interest_rate", s.aggregates.securities_interest_rate.to_string()}};
        js["figures"] = ojson::array();
        for (const auto& f : s.figures) js["figures"].push_back(ojson{{"name", f.name}, {"value", f.value.to_string()}});
        j["sheets"].push_back(std::move(js));
    }
    out << j.dump(2) << "\n";
}

}  // namespace

void write_record(const Record& record, std::ostream& out, RecordFormat format) {
    if (format == RecordFormat::Csv)
        write_csv(record, out);
    else
        write_json(record, out);
}

void write_record(const Record& record, const std::filesystem::path& path, RecordFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_record(record, out, format);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string record_to_string(const Record& record, RecordFormat format) {
    std::ostringstream os;
    write_record(record, os, format);
    return os.str();
}

RecordFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".json" ? RecordFormat::Json : RecordFormat::Csv;
}

// ---------------------------------------------------------------- reading

namespace {

struct Field {
    std::string_view text;
    long column;  // 1-based
};

std::vector<Field> split_csv(std::string_view line) {
    std::vector<Field> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        std::size_t end = comma == std::string_view::npos ? line.size() : comma;
        out.push_back({line.substr(start, end - start), static_cast<long>(start + 1)});
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

Money money_at(const Field& f, long line, const char* what) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(f.text.data(), f.text.data() + f.text.size(), v);
    if (f.text.empty() || ec != std::errc() || p != f.text.data() + f.text.size())
        throw ParseError(std::string("expected integer ") + what + ", got '" + std::string(f.text) + "'", line, f.column);
    return Money(v);
}

Rational rational_at(const Field& f, long line, const char* what) {
    try {
        return Rational::parse(f.text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("bad ") + what + ": " + e.what(), line, f.column);
    }
}

void require_empty(const Field& f, long line, const char* what) {
    if (!f.text.empty()) throw ParseError(std::string(what) + " must be empty on this row", line, f.column);
}

SimTime term_length_from(const Rational& terms) {
    const Rational ticks = terms * Rational(SimTime::kTicksPerTerm);
    if (!ticks.is_integer() || ticks <= Rational(0)) throw ParseError("term_length must be a positive multiple of 1e-6");
    return SimTime::from_ticks(ticks.num());
}

Record parse_csv(const std::string& text) {
    Record rec;
    std::istringstream in(text);
    std::string raw;
    long line_no = 0;
    bool have_header = false;
    std::vector<std::string> figure_names;
    std::size_t n_columns = 0;
    bool term_open = false;
    std::vector<std::string> agent_ids;

    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string_view line = raw;
        if (!have_header) {
            if (line.empty()) continue;
            if (line.front() == '#') {
                auto colon = line.find(':');
                if (colon == std::string_view::npos) continue;
                std::string_view key = line.substr(1, colon - 1);
                while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
                std::string_view value = line.substr(colon + 1);
                while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
                if (key == "fingerprint")
                    rec.fingerprint = std::string(value);
                else if (key == "term_length") {
                    try {
                        rec.term_length = term_length_from(Rational::parse(value));
                    } catch (const std::exception& e) {
                        throw ParseError(e.what(), line_no, static_cast<long>(colon + 2));
                    }
                }
                continue;
            }
            auto fields = split_csv(line);
            if (fields.size() < kNumFixed) throw ParseError("header has too few columns", line_no, 1);
            for (std::size_t i = 0; i < kNumFixed; ++i)
                if (fields[i].text != kFixedColumns[i])
                    throw ParseError("expected header column '" + std::string(kFixedColumns[i]) + "'", line_no,
                                     fields[i].column);
            for (std::size_t i = kNumFixed; i < fields.size(); ++i) {
                if (fields[i].text.substr(0, 7) != kFigurePrefix)
                    throw ParseError("extra header columns must be named figure:<name>", line_no, fields[i].column);
                figure_names.emplace_back(fields[i].text.substr(7));
            }
            n_columns = fields.size();
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != n_columns)
            throw ParseError("expected " + std::to_string(n_columns) + " fields, found " + std::to_string(f.size()),
                             line_no, f.back().column);
        const Money term = money_at(f[0], line_no, "term index");
        const std::int64_t expected_term = static_cast<std::int64_t>(rec.sheets.size()) - (term_open ? 1 : 0);
        if (term.units() != expected_term)
            throw ParseError("non-contiguous term index " + std::to_string(term.units()) + " (expected " +
                                 std::to_string(expected_term) + ")",
                             line_no, f[0].column);
        if (!term_open) {
            rec.sheets.emplace_back();
            rec.sheets.back().term_index = term.units();
            term_open = true;
        }
        BalanceSheet& sheet = rec.sheets.back();
        if (f[1].text == "agent") {
            AgentLine a;
            a.id = std::string(f[2].text);
            if (a.id.empty()) throw ParseError("agent row without id", line_no, f[2].column);
            a.opening_stock = money_at(f[3], line_no, "opening_stock");
            a.closing_stock = money_at(f[4], line_no, "closing_stock");
            a.inflow_total = money_at(f[5], line_no, "inflow_total");
            a.outflow_total = money_at(f[6], line_no, "outflow_total");
            for (std::size_t i = 7; i < n_columns; ++i) require_empty(f[i], line_no, "aggregate column");
            sheet.agents.push_back(std::move(a));
        } else if (f[1].text == "aggregates") {
            for (std::size_t i = 2; i < 7; ++i) require_empty(f[i], line_no, "agent column");
            sheet.base_money = money_at(f[7], line_no, "base_money");
            sheet.aggregates.notes_outstanding = money_at(f[8], line_no, "notes_outstanding");
            sheet.aggregates.government_securities_outstanding =
                money_at(f[9], line_no, "government_securities_outstanding");
            sheet.aggregates.discount_rate = rational_at(f[10], line_no, "discount_rate");
            sheet.aggregates.securities_interest_rate = rational_at(f[11], line_no, "securities_interest_rate");
            for (std::size_t i = 0; i < figure_names.size(); ++i)
                sheet.figures.push_back({figure_names[i], rational_at(f[kNumFixed + i], line_no, "figure value")});
            std::vector<std::string> ids;
            for (const auto& a : sheet.agents) ids.push_back(a.id);
            if (sheet.term_index == 0)
                agent_ids = ids;
            else if (ids != agent_ids)
                throw ParseError("agent rows of term " + std::to_string(sheet.term_index) + " differ from term 0",
                                 line_no, 1);
            term_open = false;
        } else {
            throw ParseError("row kind must be 'agent' or 'aggregates'", line_no, f[1].column);
        }
    }
    if (!have_header) throw ParseError("missing CSV header", line_no + 1, 1);
    if (term_open) throw ParseError("term " + std::to_string(rec.sheets.back().term_index) + " has no aggregates row",
                                    line_no, 1);
    return rec;
}

std::pair<long, long> line_col(const std::string& text, std::size_t byte) {
    long line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

Record parse_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        auto [l, c] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(std::string("malformed JSON record: ") + e.what(), l, c);
    }
    auto fail = [](const std::string& path, const std::string& msg) -> ParseError {
        return ParseError("JSON record " + path + ": " + msg);
    };
    try {
        if (j.value("format", std::string{}) != "mfe-record") throw fail("/format", "expected \"mfe-record\"");
        Record rec;
        rec.fingerprint = j.value("fingerprint", std::string{});
        rec.term_length = term_length_from(Rational::parse(j.at("term_length").get<std::string>()));
        std::vector<std::string> agent_ids;
        const auto& sheets = j.at("sheets");
        for (std::size_t si = 0; si < sheets.size(); ++si) {
            const auto& js = sheets[si];
            const std::string path = "/sheets/" + std::to_string(si);
            BalanceSheet s;
            s.term_index = js.at("term").get<std::int64_t>();
            if (s.term_index != static_cast<std::int64_t>(si))
                throw fail(path + "/term", "non-contiguous term index " + std::to_string(s.term_index));
            s.base_money = Money(js.at("base_money").get<std::int64_t>());
            std::vector<std::string> ids;
            for (const auto& ja : js.at("agents")) {
                AgentLine a;
                a.id = ja.at("id").get<std::string>();
                a.opening_stock = Money(ja.at("opening_stock").get<std::int64_t>());
                a.closing_stock = Money(ja.at("closing_stock").get<std::int64_t>());
                a.inflow_total = Money(ja.at("inflow_total").get<std::int64_t>());
                a.outflow_total = Money(ja.at("outflow_total").get<std::int64_t>());
                ids.push_back(a.id);
                s.agents.push_back(std::move(a));
            }
            if (si == 0)
                agent_ids = ids;
            else if (ids != agent_ids)
                throw fail(path + "/agents", "agent set differs from term 0");
            const auto& ag = js.at("aggregates");
            s.aggregates.notes_outstanding = Money(ag.at("notes_outstanding").get<std::int64_t>());
            s.aggregates.government_securities_outstanding =
                Money(ag.at("government_securities_outstanding").get<std::int64_t>());
            s.aggregates.discount_rate = Rational::parse(ag.at("discount_rate").get<std::string>());
            s.aggregates.securities_interest_rate = Rational::parse(ag.at("securities_interest_rate").get<std::string>());
            for (const auto& jf : js.value("figures", nlohmann::json::array()))
                s.figures.push_back({jf.at("name").get<std::string>(), Rational::parse(jf.at("value").get<std::string>())});
            rec.sheets.push_back(std::move(s));
        }
        return rec;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("JSON record structure: ") + e.what());
    }
}

}  // namespace

Record parse_record(const std::string& text, IdentityPolicy policy, std::vector<std::string>* warnings) {
    std::size_t first = text.find_first_not_of(" \t\r\n");
    Record rec = (first != std::string::npos && text[first] == '{') ? parse_json(text) : parse_csv(text);
    for (const auto& report : verify_identities(rec)) {
        for (const auto& c : report.checks) {
            if (c.passed) continue;
            std::string msg = "term " + std::to_string(report.term_index) + ": identity " + c.name +
                              " violated (discrepancy " + std::to_string(c.discrepancy.units()) + ")";
            if (policy == IdentityPolicy::Reject) throw ValidationError(msg);
            if (warnings) warnings->push_back(std::move(msg));
        }
    }
    return rec;
}

Record read_record(const std::filesystem::path& path, IdentityPolicy policy, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open record " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_record(ss.str(), policy, warnings);
}

}  // namespace mfe
