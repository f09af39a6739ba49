#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mfe/event_log.hpp"
#include "mfe/network.hpp"

namespace mfe {

struct AgentLine {
    std::string id;
    Money opening_stock{0};
    Money closing_stock{0};
    Money inflow_total{0};
    Money outflow_total{0};
    friend bool operator==(const AgentLine&, const AgentLine&) = default;
};

struct NamedFigure {
    std::string name;
    Rational value;
    friend bool operator==(const NamedFigure&, const NamedFigure&) = default;
};

/// One term of the observer's record: a globally synchronized cut.
struct BalanceSheet {
    std::int64_t term_index = 0;
    std::vector<AgentLine> agents;
    Aggregates aggregates;
    Money base_money{0};  ///< total stock before any issuance
    std::vector<NamedFigure> figures;
    friend bool operator==(const BalanceSheet&, const BalanceSheet&) = default;
};

struct Record {
    std::string fingerprint;
    SimTime term_length = SimTime::terms(1);
    std::vector<BalanceSheet> sheets;
    friend bool operator==(const Record&, const Record&) = default;

    std::size_t terms() const { return sheets.size(); }
};

/// Builds the sheet for one term from the log: flows are summed from the
/// settlements booked to the term, closing stocks and aggregates come from the
/// observer's boundary cut. Throws ValidationError if the log does not reach
/// the end of the term.
BalanceSheet compile_balance_sheet(const EventLog& log, const NetworkState& state, std::int64_t term_index,
                                   SimTime term_length);

/// All complete terms in the log, in one pass.
Record compile_record(const EventLog& log, const NetworkState& state);

struct IdentityCheck {
    std::string name;
    bool passed = false;
    Money discrepancy{0};  ///< lhs - rhs
};

struct IdentityReport {
    std::int64_t term_index = 0;
    std::vector<IdentityCheck> checks;
    bool all_passed() const;
    std::size_t failures() const;
};

/// closing = opening + inflow - outflow per agent, and
/// sum(closing) = notes_outstanding + base_money.
IdentityReport verify_identities(const BalanceSheet& sheet);
std::vector<IdentityReport> verify_identities(const Record& record);

enum class RecordFormat { Csv, Json };
enum class IdentityPolicy { Reject, Warn };

void write_record(const Record& record, std::ostream& out, RecordFormat format);
void write_record(const Record& record, const std::filesystem::path& path, RecordFormat format);
std::string record_to_string(const Record& record, RecordFormat format);

/// Parses either format (JSON if the first non-blank character is '{').
/// Structural problems throw ParseError with line/column; identity failures
/// throw ValidationError under Reject, or are appended to `warnings`.
Record parse_record(const std::string& text, IdentityPolicy policy = IdentityPolicy::Reject,
                    std::vector<std::string>* warnings = nullptr);
Record read_record(const std::filesystem::path& path, IdentityPolicy policy = IdentityPolicy::Reject,
                   std::vector<std::string>* warnings = nullptr);

RecordFormat format_from_path(const std::filesystem::path& path);

}  // namespace mfe
