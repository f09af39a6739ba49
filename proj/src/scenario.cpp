#include "mfe/scenario.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mfe/philox.hpp"

namespace mfe {

using nlohmann::json;

namespace {

Rational rational_field(const json& v, const std::string& what) {
    if (v.is_string()) return Rational::parse(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
    if (v.is_number_float()) {
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v.get<double>());
        if (ec != std::errc()) throw ParseError("bad number for " + what);
        std::string s(buf, p);
        if (s.find('e') != std::string::npos) throw ParseError(what + ": exponent notation not supported, use a string");
        return Rational::parse(s);
    }
    throw ParseError(what + ": expected a number or rational string");
}

Money money_field(const json& v, const std::string& what) {
    if (!v.is_number_integer()) throw ParseError(what + ": expected an integer number of minor units");
    return Money(v.get<std::int64_t>());
}

SimTime time_field(const json& v, const std::string& what) {
    if (!v.is_number()) throw ParseError(what + ": expected a time in terms");
    return SimTime::from_terms(v.get<double>());
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(ctx + ": missing field '" + key + "'");
    return *it;
}

std::string str_field(const json& obj, const char* key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_string()) throw ParseError(ctx + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

json time_json(SimTime t) { return t.to_terms(); }

std::string figure_kind_name(FigureKind k) {
    switch (k) {
        case FigureKind::ChannelFlow: return "channel_flow";
        case FigureKind::ChannelRate: return "channel_rate";
        case FigureKind::ChannelMultiplier: return "channel_multiplier";
        case FigureKind::Stock: return "stock";
    }
    return "?";
}

FigureKind figure_kind_from(const std::string& s) {
    if (s == "channel_flow") return FigureKind::ChannelFlow;
    if (s == "channel_rate") return FigureKind::ChannelRate;
    if (s == "channel_multiplier") return FigureKind::ChannelMultiplier;
    if (s == "stock") return FigureKind::Stock;
    throw ParseError("unknown figure kind '" + s + "'");
}

}  // namespace

std::string to_string(Role r) {
    switch (r) {
        case Role::CentralBank: return "CentralBank";
        case Role::Government: return "Government";
        case Role::HouseholdSector: return "HouseholdSector";
        case Role::CorporateSector: return "CorporateSector";
        case Role::BankSector: return "BankSector";
        case Role::Custom: return "Custom";
    }
    return "Custom";
}

Role role_from_string(const std::string& s) {
    if (s == "CentralBank") return Role::CentralBank;
    if (s == "Government") return Role::Government;
    if (s == "HouseholdSector") return Role::HouseholdSector;
    if (s == "CorporateSector") return Role::CorporateSector;
    if (s == "BankSector") return Role::BankSector;
    if (s == "Custom") return Role::Custom;
    throw ParseError("unknown agent role '" + s + "'");
}

void PolicySchedule::append(const PolicySchedule& other) {
    issuance.insert(issuance.end(), other.issuance.begin(), other.issuance.end());
    multipliers.insert(multipliers.end(), other.multipliers.begin(), other.multipliers.end());
    gains.insert(gains.end(), other.gains.begin(), other.gains.end());
}

ScenarioSpec scenario_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("scenario: top level must be an object");
    ScenarioSpec s;
    s.name = j.value("name", std::string{});
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned() && !it->is_number_integer()) throw ParseError("scenario: seed must be an integer");
        s.seed = it->get<std::uint64_t>();
    }
    if (auto it = j.find("term_length"); it != j.end()) s.term_length = time_field(*it, "term_length");
    if (s.term_length.ticks() <= 0) throw ValidationError("scenario: term_length must be positive");
    if (auto it = j.find("initial_securities"); it != j.end()) s.initial_securities = money_field(*it, "initial_securities");

    for (const json& a : require(j, "agents", "scenario")) {
        AgentSpec as;
        as.id = str_field(a, "id", "agent");
        const std::string ctx = "agent '" + as.id + "'";
        as.role = role_from_string(str_field(a, "role", ctx));
        as.label = a.value("label", std::string{});
        if (auto it = a.find("stock"); it != a.end()) as.stock = money_field(*it, ctx + " stock");
        if (auto it = a.find("gain"); it != a.end()) as.gain = rational_field(*it, ctx + " gain");
        if (auto it = a.find("mean_interval"); it != a.end()) {
            if (!it->is_number()) throw ParseError(ctx + ": mean_interval must be a number");
            as.mean_interval = it->get<double>();
        }
        s.agents.push_back(std::move(as));
    }
    for (const json& c : require(j, "channels", "scenario")) {
        ChannelSpec cs;
        cs.id = str_field(c, "id", "channel");
        const std::string ctx = "channel '" + cs.id + "'";
        cs.source = str_field(c, "source", ctx);
        cs.sink = str_field(c, "sink", ctx);
        cs.rate = money_field(require(c, "rate", ctx), ctx + " rate");
        if (auto it = c.find("multiplier"); it != c.end()) cs.multiplier = rational_field(*it, ctx + " multiplier");
        cs.adjustable = c.value("adjustable", false);
        cs.tag = c.value("tag", std::string{});
        s.channels.push_back(std::move(cs));
    }
    if (auto p = j.find("policy"); p != j.end()) {
        for (const json& i : p->value("issuance", json::array()))
            s.policy.issuance.push_back({time_field(require(i, "time", "issuance"), "issuance time"),
                                         money_field(require(i, "amount", "issuance"), "issuance amount")});
        for (const json& m : p->value("multipliers", json::array()))
            s.policy.multipliers.push_back({time_field(require(m, "time", "multiplier"), "multiplier time"),
                                            str_field(m, "channel", "multiplier setting"),
                                            rational_field(require(m, "multiplier", "multiplier"), "multiplier")});
        for (const json& g : p->value("gains", json::array()))
            s.policy.gains.push_back({time_field(require(g, "time", "gain"), "gain time"),
                                      str_field(g, "agent", "gain setting"),
                                      rational_field(require(g, "gain", "gain"), "gain")});
    }
    for (const json& sh : j.value("shocks", json::array())) {
        s.shocks.push_back({time_field(require(sh, "time", "shock"), "shock time"), str_field(sh, "agent", "shock"),
                            str_field(sh, "counterparty", "shock"),
                            money_field(require(sh, "amount", "shock"), "shock amount")});
    }
    for (const json& f : j.value("figures", json::array())) {
        s.figures.push_back({str_field(f, "name", "figure"), figure_kind_from(str_field(f, "kind", "figure")),
                             str_field(f, "ref", "figure")});
    }
    return s;
}

json scenario_to_json(const ScenarioSpec& s) {
    json j;
    j["name"] = s.name;
    j["seed"] = s.seed;
    j["term_length"] = time_json(s.term_length);
    j["initial_securities"] = s.initial_securities.units();
    j["agents"] = json::array();
    for (const auto& a : s.agents) {
        json ja{{"id", a.id},
                {"role", to_string(a.role)},
                {"stock", a.stock.units()},
                {"gain", a.gain.to_string()},
                {"mean_interval", a.mean_interval}};
        if (!a.label.empty()) ja["label"] = a.label;
        j["agents"].push_back(std::move(ja));
    }
    j["channels"] = json::array();
    for (const auto& c : s.channels) {
        json jc{{"id", c.id},
                {"source", c.source},
                {"sink", c.sink},
                {"rate", c.rate.units()},
                {"multiplier", c.multiplier.to_string()},
                {"adjustable", c.adjustable}};
        if (!c.tag.empty()) jc["tag"] = c.tag;
        j["channels"].push_back(std::move(jc));
    }
    json policy{{"issuance", json::array()}, {"multipliers", json::array()}, {"gains", json::array()}};
    for (const auto& i : s.policy.issuance) policy["issuance"].push_back({{"time", time_json(i.time)}, {"amount", i.amount.units()}});
    for (const auto& m : s.policy.multipliers)
        policy["multipliers"].push_back(
            {{"time", time_json(m.time)}, {"channel", m.channel}, {"multiplier", m.multiplier.to_string()}});
    for (const auto& g : s.policy.gains)
        policy["gains"].push_back({{"time", time_json(g.time)}, {"agent", g.agent}, {"gain", g.gain.to_string()}});
    j["policy"] = std::move(policy);
    j["shocks"] = json::array();
    for (const auto& sh : s.shocks)
        j["shocks"].push_back({{"time", time_json(sh.time)},
                               {"agent", sh.agent},
                               {"counterparty", sh.counterparty},
                               {"amount", sh.amount.units()}});
    j["figures"] = json::array();
    for (const auto& f : s.figures) j["figures"].push_back({{"name", f.name}, {"kind", figure_kind_name(f.kind)}, {"ref", f.ref}});
    return j;
}

std::string ScenarioSpec::fingerprint() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(scenario_to_json(*this).dump())));
    return buf;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ParseError("scenario " + path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

}  // namespace mfe
