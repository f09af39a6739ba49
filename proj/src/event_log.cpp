#include "mfe/event_log.hpp"

#include <ostream>
#include <sstream>

#include <json.hpp>

namespace mfe {

using ojson = nlohmann::ordered_json;

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::AgentUpdate: return "AgentUpdate";
        case EventKind::Transfer: return "Transfer";
        case EventKind::Settlement: return "Settlement";
        case EventKind::Shock: return "Shock";
        case EventKind::Issue: return "Issue";
        case EventKind::Policy: return "Policy";
        case EventKind::Boundary: return "Boundary";
    }
    return "?";
}

namespace {

struct PayloadWriter {
    ojson& j;

    void operator()(const AgentUpdateEvent& e) const {
        j["agent"] = e.agent;
        if (e.exempt) {
            j["exempt"] = true;
            return;
        }
        j["deficit"] = e.deficit.to_string();
        j["target"] = e.target.to_string();
        j["residual"] = e.residual.to_string();
        ojson deltas = ojson::array();
        for (const auto& d : e.deltas) deltas.push_back(ojson{{"channel", d.channel}, {"delta", d.delta.units()}});
        j["deltas"] = std::move(deltas);
    }
    void operator()(const TransferEvent& e) const {
        j["channel"] = e.channel;
        j["amount"] = e.amount.units();
    }
    void operator()(const SettlementEvent& e) const {
        j["channel"] = e.channel;
        j["amount"] = e.amount.units();
        if (e.observer) j["observer"] = true;
    }
    void operator()(const ShockEvent& e) const {
        j["agent"] = e.agent;
        j["counterparty"] = e.counterparty;
        j["amount"] = e.amount.units();
    }
    void operator()(const IssueEvent& e) const {
        j["agent"] = e.agent;
        j["amount"] = e.amount.units();
    }
    void operator()(const PolicyEvent& e) const {
        j["target"] = e.target == PolicyEvent::Target::Multiplier ? "multiplier" : "gain";
        j["ref"] = e.ref;
        j["value"] = e.value.to_string();
    }
    void operator()(const BoundaryEvent& e) const {
        ojson stocks = ojson::array();
        for (Money m : e.stocks) stocks.push_back(m.units());
        j["stocks"] = std::move(stocks);
        j["notes_outstanding"] = e.aggregates.notes_outstanding.units();
        j["government_securities_outstanding"] = e.aggregates.government_securities_outstanding.units();
        j["discount_rate"] = e.aggregates.discount_rate.to_string();
        j["securities_interest_rate"] = e.aggregates.securities_interest_rate.to_string();
        ojson figs = ojson::array();
        for (const auto& f : e.figures) figs.push_back(f.to_string());
        j["figures"] = std::move(figs);
    }
};

}  // namespace

void write_jsonl(std::ostream& out, const EventLog& log) {
    for (const Event& e : log) {
        ojson j;
        j["time"] = e.time.as_terms().to_string();
        j["term"] = e.term;
        j["kind"] = to_string(e.kind());
        std::visit(PayloadWriter{j}, e.payload);
        out << j.dump() << '\n';
    }
}

std::string to_jsonl(const EventLog& log) {
    std::ostringstream os;
    write_jsonl(os, log);
    return os.str();
}

}  // namespace mfe
