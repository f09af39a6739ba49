#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfe/money.hpp"
#include "mfe/rational.hpp"
#include "mfe/sim_time.hpp"

namespace mfe {

enum class Role { CentralBank, Government, HouseholdSector, CorporateSector, BankSector, Custom };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct AgentSpec {
    std::string id;
    Role role = Role::Custom;
    std::string label;  // only meaningful for Role::Custom
    Money stock{0};
    Rational gain{0};
    /// Mean waiting time between the agent's own events, in terms.
    double mean_interval = 0.25;
};

struct ChannelSpec {
    std::string id;
    std::string source;
    std::string sink;
    Money rate{0};
    Rational multiplier{1};
    bool adjustable = false;
    /// Optional role tag: "bond", "redemption", "discount", "interest", "tax", ...
    std::string tag;
};

struct IssuanceItem {
    SimTime time;
    Money amount;
};

struct MultiplierSetting {
    SimTime time;
    std::string channel;
    Rational multiplier;
};

struct GainSetting {
    SimTime time;
    std::string agent;
    Rational gain;
};

/// Timed instrument settings. Multiplier and gain settings fire at their exact
/// times; issuance is carried out by the CentralBank at its first own event at
/// or after the scheduled time.
struct PolicySchedule {
    std::vector<IssuanceItem> issuance;
    std::vector<MultiplierSetting> multipliers;
    std::vector<GainSetting> gains;

    bool empty() const { return issuance.empty() && multipliers.empty() && gains.empty(); }
    void append(const PolicySchedule& other);
};

/// One-off redistribution: `amount` moves from `counterparty` to `agent`.
struct ShockSpec {
    SimTime time;
    std::string agent;
    std::string counterparty;
    Money amount;
};

enum class FigureKind { ChannelFlow, ChannelRate, ChannelMultiplier, Stock };

/// A user-defined named figure recorded on every balance sheet.
struct FigureSpec {
    std::string name;
    FigureKind kind = FigureKind::ChannelFlow;
    std::string ref;  // channel id or agent id
};

struct ScenarioSpec {
    std::string name;
    std::vector<AgentSpec> agents;
    std::vector<ChannelSpec> channels;
    std::uint64_t seed = 0;
    SimTime term_length = SimTime::terms(1);
    PolicySchedule policy;
    std::vector<ShockSpec> shocks;
    std::vector<FigureSpec> figures;
    Money initial_securities{0};

    /// 16 hex digits; FNV-1a over the canonical JSON form.
    std::string fingerprint() const;
};

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& s);

ScenarioSpec load_scenario(const std::filesystem::path& path);

}  // namespace mfe
