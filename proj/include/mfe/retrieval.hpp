#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfe/engine.hpp"
#include "mfe/record.hpp"
#include "mfe/scenario.hpp"

namespace mfe {

/// Hidden initial imbalances: per non-exempt agent, a money-per-term offset
/// added to its outgoing adjustable channel rates at time 0 (the partners'
/// snapshots are left stale), plus optional gain overrides.
struct InconsistencyAssignment {
    std::map<std::string, Money> offsets;
    std::map<std::string, Rational> gains;
    friend bool operator==(const InconsistencyAssignment&, const InconsistencyAssignment&) = default;
};

/// Non-exempt agents of the scenario, in declaration order; the coordinates of
/// the search space.
std::vector<std::string> assignment_agents(const ScenarioSpec& spec);

/// Smallest offset the agent can take without any rate going negative.
Money minimum_offset(const ScenarioSpec& spec, const std::string& agent);

/// Throws ValidationError when the assignment names unknown or exempt agents
/// or would drive a rate below zero.
void apply_assignment(NetworkState& state, const InconsistencyAssignment& assignment);

/// Everything one simulated run produced.
struct Simulation {
    NetworkState state;
    EventLog log;
    Record record;
    bool overflowed = false;  ///< money or rate arithmetic left the 64-bit range; record holds the terms before
};

/// Builds the scenario, adds the extra schedule and shocks, applies the
/// assignment and runs `n_terms` full terms. With `keep_partial`, an
/// OverflowError ends the run early instead of propagating.
Simulation simulate(const ScenarioSpec& spec, std::int64_t n_terms, const InconsistencyAssignment& assignment = {},
                    const PolicySchedule& extra_policy = {}, const std::vector<ShockSpec>& extra_shocks = {},
                    bool keep_partial = false);

Record retrace(const InconsistencyAssignment& assignment, const ScenarioSpec& spec, std::int64_t n_terms);

/// Record flattened to terms x figures. Columns: per agent opening, closing,
/// inflow, outflow; the four aggregates; then the scenario's own figures.
struct FigureMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd values;
};
FigureMatrix figure_matrix(const Record& record);

/// Per-figure weights by column name; missing names weigh 1.
using FigureWeights = std::map<std::string, double>;

/// Weighted normalized RMS over all (term, figure) cells. If `prefix_terms`
/// is set only the first that many terms count. Throws ValidationError on a
/// shape or name mismatch.
double reproduction_error(const Record& simulated, const Record& target, const FigureWeights& weights = {},
                          std::optional<std::int64_t> prefix_terms = std::nullopt);

struct FitConfig {
    std::int64_t budget = 10'000;  ///< total simulations across all starts
    double tolerance = 1e-3;
    int starts = 64;
    std::uint64_t seed = 0;
    std::optional<std::int64_t> prefix_terms;
    std::int64_t initial_step = 8;
    std::int64_t search_radius = 64;  ///< random starts draw offsets from [-r, r]
    bool zero_first_start = true;     ///< start 0 is the zero assignment
    FigureWeights weights;
    std::map<std::string, Rational> gains;  ///< fixed gain overrides carried into every candidate
    int jobs = 1;
};

struct FitResult {
    InconsistencyAssignment best;
    double error = 0.0;
    std::int64_t evaluations = 0;
    bool converged = false;
    std::vector<std::pair<std::int64_t, double>> trace;  ///< (1-based evaluation index, error)
};

/// Multi-start coordinate pattern search over integer offsets. Each start gets
/// an equal share of the budget; the search stops at the first start (in
/// index order) that reaches the tolerance, so results do not depend on jobs.
FitResult fit(const Record& target, const ScenarioSpec& spec, const FitConfig& config);

}  // namespace mfe
